#include "qw/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "qw/error.hpp"

namespace qw {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    require(bytes_.size() - pos_ >= n, ErrorKind::truncated, "checkpoint is truncated");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void Checkpoint::save(const std::filesystem::path& path) const {
  std::string out(kCheckpointMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  const std::string m = meta.dump();
  put<std::uint32_t>(out, std::uint32_t(m.size()));
  out += m;
  put<std::uint32_t>(out, std::uint32_t(tensors.size()));
  for (const auto& [name, t] : tensors) {
    put<std::uint32_t>(out, std::uint32_t(name.size()));
    out += name;
    put<std::uint32_t>(out, std::uint32_t(t.rank()));
    for (auto d : t.shape()) put<std::uint64_t>(out, d);
    for (double v : t.data()) put<double>(out, v);
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  require(bool(f), ErrorKind::io, "cannot write checkpoint " + path.string());
  f.write(out.data(), std::streamsize(out.size()));
  require(bool(f), ErrorKind::io, "short write to " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  require(bool(f), ErrorKind::io, "cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(bytes);
  require(r.str(4) == std::string(kCheckpointMagic, 4), ErrorKind::bad_magic,
          path.string() + " is not a checkpoint");
  const auto version = r.get<std::uint32_t>();
  require(version == kCheckpointVersion, ErrorKind::checkpoint_mismatch,
          "unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  ck.meta = nlohmann::json::parse(r.str(r.get<std::uint32_t>()));
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str(r.get<std::uint32_t>());
    Shape shape(r.get<std::uint32_t>());
    for (auto& d : shape) d = r.get<std::uint64_t>();
    Tensor t(shape);
    for (auto& v : t.data()) v = r.get<double>();
    ck.tensors.emplace(std::move(name), std::move(t));
  }
  require(r.done(), ErrorKind::dim_mismatch, "trailing bytes in checkpoint");
  return ck;
}

void store_model(Checkpoint& ck, const Forecaster& model, const AdamW* opt) {
  for (const auto& p : model.parameters()) ck.tensors[p.name] = p.value;
  ck.meta["model"] = to_json(model.config());
  ck.meta["n_lat"] = model.n_lat();
  ck.meta["n_lon"] = model.n_lon();
  if (opt) {
    ck.meta["optimizer_step"] = opt->state().step;
    for (const auto& [name, t] : opt->state().m) ck.tensors["adam.m/" + name] = t;
    for (const auto& [name, t] : opt->state().v) ck.tensors["adam.v/" + name] = t;
  }
}

void restore_model(const Checkpoint& ck, Forecaster& model, AdamW* opt) {
  for (auto& p : model.parameters()) {
    auto it = ck.tensors.find(p.name);
    require(it != ck.tensors.end(), ErrorKind::checkpoint_mismatch,
            "checkpoint lacks parameter '" + p.name + "'");
    require(it->second.shape() == p.value.shape(), ErrorKind::checkpoint_mismatch,
            "parameter '" + p.name + "' has shape " + shape_str(it->second.shape()) +
                " in the checkpoint, " + shape_str(p.value.shape()) + " in the model");
    p.value = it->second;
    p.zero_grad();
  }
  if (!opt) return;
  auto& st = opt->state();
  st = OptimizerState{};
  st.step = ck.meta.value("optimizer_step", std::uint64_t{0});
  for (const auto& [name, t] : ck.tensors) {
    if (name.rfind("adam.m/", 0) == 0) st.m[name.substr(7)] = t;
    if (name.rfind("adam.v/", 0) == 0) st.v[name.substr(7)] = t;
  }
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"channels", c.channels},     {"precip_channel", c.precip_channel},
          {"num_bins", c.num_bins},     {"hidden", c.hidden},
          {"blocks", c.blocks},         {"encoder_hidden", c.encoder_hidden},
          {"tau_init", c.tau_init},     {"tau_min", c.tau_min},
          {"step_scale", c.step_scale}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.channels = j.value("channels", c.channels);
  c.precip_channel = j.value("precip_channel", c.precip_channel);
  c.num_bins = j.value("num_bins", c.num_bins);
  c.hidden = j.value("hidden", c.hidden);
  c.blocks = j.value("blocks", c.blocks);
  c.encoder_hidden = j.value("encoder_hidden", c.encoder_hidden);
  c.tau_init = j.value("tau_init", c.tau_init);
  c.tau_min = j.value("tau_min", c.tau_min);
  c.step_scale = j.value("step_scale", c.step_scale);
  c.validate();
  return c;
}

nlohmann::json to_json(const Normalizer& n) {
  return {{"mean", n.mean}, {"stddev", n.stddev}, {"precip_channel", n.precip_channel}};
}

Normalizer normalizer_from_json(const nlohmann::json& j) {
  Normalizer n;
  n.mean = j.at("mean").get<std::vector<double>>();
  n.stddev = j.at("stddev").get<std::vector<double>>();
  n.precip_channel = j.at("precip_channel").get<std::size_t>();
  require(n.mean.size() == n.stddev.size(), ErrorKind::checkpoint_mismatch,
          "normalizer mean/stddev lengths differ");
  return n;
}

}  // namespace qw
