#include "qw/fieldio.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "qw/error.hpp"

namespace qw {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(std::uint8_t((v >> (8 * b)) & 0xFFu));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t pos) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= std::uint32_t(in[pos + b]) << (8 * b);
  return v;
}

}  // namespace

bool is_valid_variable_name(const std::string& name) {
  if (name.empty()) return false;
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '_' || c == '-';
    if (!ok) return false;
  }
  return true;
}

std::vector<std::uint8_t> encode_field(const GridField& field) {
  const auto& g = field.grid;
  require(field.values.size() == g.n_cells(), ErrorKind::dim_mismatch,
          "field '" + field.variable + "' has " +
              std::to_string(field.values.size()) + " values for a " +
              std::to_string(g.n_lat()) + "x" + std::to_string(g.n_lon()) +
              " grid");
  for (double v : field.values) {
    require(std::isfinite(v), ErrorKind::non_finite,
            "field '" + field.variable + "' contains non-finite values");
  }
  json header = {
      {"variable", field.variable},
      {"units", field.units},
      {"n_lat", g.n_lat()},
      {"n_lon", g.n_lon()},
      {"latitudes", g.latitudes()},
      {"lon_start", g.lon_start()},
      {"lon_step", g.lon_step()},
      {"date", field.date.iso()},
      {"lead", field.lead},
  };
  const std::string text = header.dump();

  std::vector<std::uint8_t> out;
  out.reserve(8 + text.size() + 4 * field.values.size());
  out.insert(out.end(), std::begin(kFieldMagic), std::end(kFieldMagic));
  put_u32(out, std::uint32_t(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (double v : field.values) put_u32(out, std::bit_cast<std::uint32_t>(float(v)));
  return out;
}

GridField decode_field(std::span<const std::uint8_t> bytes) {
  require(bytes.size() >= 4, ErrorKind::truncated, "field file shorter than magic");
  require(std::memcmp(bytes.data(), kFieldMagic, 4) == 0, ErrorKind::bad_magic,
          "bad magic: expected QWF1");
  require(bytes.size() >= 8, ErrorKind::truncated, "field header length missing");
  const std::uint32_t header_len = get_u32(bytes, 4);
  require(bytes.size() >= 8 + std::size_t(header_len), ErrorKind::truncated,
          "field header truncated");

  json header;
  try {
    header = json::parse(bytes.begin() + 8, bytes.begin() + 8 + header_len);
  } catch (const json::exception& e) {
    fail(ErrorKind::io, std::string("unreadable field header: ") + e.what());
  }

  GridField f;
  std::size_t n_lat = 0, n_lon = 0;
  std::vector<double> lats;
  double lon_start = 0.0, lon_step = 0.0;
  std::string date_text;
  try {
    f.variable = header.at("variable").get<std::string>();
    f.units = header.at("units").get<std::string>();
    n_lat = header.at("n_lat").get<std::size_t>();
    n_lon = header.at("n_lon").get<std::size_t>();
    lats = header.at("latitudes").get<std::vector<double>>();
    lon_start = header.at("lon_start").get<double>();
    lon_step = header.at("lon_step").get<double>();
    date_text = header.at("date").get<std::string>();
    f.lead = header.at("lead").get<int>();
  } catch (const json::exception& e) {
    fail(ErrorKind::io, std::string("incomplete field header: ") + e.what());
  }
  f.date = Date::parse(date_text);
  require(lats.size() == n_lat, ErrorKind::dim_mismatch,
          "header latitude list length differs from n_lat");
  f.grid = LatLonGrid(std::move(lats), n_lon, lon_start, lon_step);
  require(f.grid.north_to_south(), ErrorKind::validation,
          "latitudes must be stored north-to-south");

  const std::size_t payload = bytes.size() - 8 - header_len;
  require(payload % 4 == 0, ErrorKind::truncated, "payload is not whole float32 values");
  require(payload == 4 * n_lat * n_lon, ErrorKind::dim_mismatch,
          "header declares " + std::to_string(n_lat) + "x" + std::to_string(n_lon) +
              " but payload holds " + std::to_string(payload / 4) + " values");
  f.values.resize(n_lat * n_lon);
  const std::size_t base = 8 + header_len;
  for (std::size_t k = 0; k < f.values.size(); ++k)
    f.values[k] = double(std::bit_cast<float>(get_u32(bytes, base + 4 * k)));
  return f;
}

void write_field(const GridField& field, const fs::path& path) {
  const auto bytes = encode_field(field);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(bool(out), ErrorKind::io, "cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  require(bool(out), ErrorKind::io, "write failed: " + path.string());
}

GridField read_field(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(bool(in), ErrorKind::io, "cannot open field file: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_field(bytes);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

std::string FieldKey::str() const {
  return variable + "@" + date.iso() + "+L" + std::to_string(lead);
}

Catalog Catalog::open(const fs::path& root) {
  require(fs::is_directory(root), ErrorKind::io,
          "catalog root is not a directory: " + root.string());
  Catalog cat(root);
  for (const auto& var_dir : fs::directory_iterator(root)) {
    if (!var_dir.is_directory()) continue;
    const std::string variable = var_dir.path().filename().string();
    for (const auto& entry : fs::directory_iterator(var_dir.path())) {
      if (!entry.is_regular_file() || entry.path().extension() != ".qwf") continue;
      const std::string stem = entry.path().stem().string();
      const auto sep = stem.find("_L");
      require(sep == 10 && stem.size() > 12, ErrorKind::io,
              "unrecognised catalog file name: " + entry.path().string());
      FieldKey key{variable, Date::parse(stem.substr(0, 10)),
                   std::stoi(stem.substr(12))};
      require(!cat.contains(key), ErrorKind::validation,
              "duplicate catalog key " + key.str());
      cat.entries_.emplace(key, entry.path());
    }
  }
  return cat;
}

fs::path Catalog::path_for(const FieldKey& key) const {
  require(is_valid_variable_name(key.variable), ErrorKind::validation,
          "invalid variable name '" + key.variable + "'");
  char lead[16];
  std::snprintf(lead, sizeof lead, "_L%03d", key.lead);
  return root_ / key.variable / (key.date.iso() + lead + ".qwf");
}

void Catalog::declare(const FieldKey& key) { entries_[key] = path_for(key); }

const fs::path& Catalog::lookup(const FieldKey& key) const {
  auto it = entries_.find(key);
  require(it != entries_.end(), ErrorKind::missing_data,
          "catalog " + root_.string() + " has no entry " + key.str());
  return it->second;
}

std::vector<FieldKey> Catalog::keys() const {
  std::vector<FieldKey> out;
  out.reserve(entries_.size());
  for (const auto& [k, _] : entries_) out.push_back(k);
  return out;
}

void Catalog::write(const GridField& field) {
  const FieldKey key{field.variable, field.date, field.lead};
  declare(key);
  write_field(field, path_for(key));
}

void FieldArchive::put(GridField field) {
  FieldKey key{field.variable, field.date, field.lead};
  fields_.insert_or_assign(std::move(key), std::move(field));
}

const GridField& FieldArchive::get(const FieldKey& key) const {
  auto it = fields_.find(key);
  require(it != fields_.end(), ErrorKind::missing_data,
          "archive has no field " + key.str());
  return it->second;
}

void FieldArchive::save(const fs::path& root) const {
  Catalog cat(root);
  for (const auto& [_, f] : fields_) cat.write(f);
}

FieldArchive FieldArchive::load(const fs::path& root) {
  const Catalog cat = Catalog::open(root);
  FieldArchive out;
  for (const auto& key : cat.keys()) {
    GridField f = cat.read(key);
    require(f.variable == key.variable && f.date == key.date && f.lead == key.lead,
            ErrorKind::validation,
            "file header disagrees with catalog key " + key.str());
    out.put(std::move(f));
  }
  return out;
}

}  // namespace qw
