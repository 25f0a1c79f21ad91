#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>

#include "qw/calendar.hpp"
#include "qw/config.hpp"
#include "qw/error.hpp"
#include "qw/fieldio.hpp"

using namespace qw;
namespace fs = std::filesystem;

namespace {

GridField field_2x2() {
  GridField f;
  f.variable = "precip";
  f.units = "mm";
  f.grid = LatLonGrid({45.0, -45.0}, 2);
  f.date = Date(2022, 3, 14);
  f.lead = 7;
  f.values = {0.0, 1.0, 2.0, 3.0};
  return f;
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::validation;
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("qw_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_SUITE("fieldio") {
  TEST_CASE("round trip of a 2x2 field keeps every bit") {
    const auto f = field_2x2();
    const auto bytes = encode_field(f);
    CHECK(std::memcmp(bytes.data(), "QWF1", 4) == 0);
    const auto g = decode_field(bytes);
    CHECK(g.values == f.values);
    CHECK(g.variable == "precip");
    CHECK(g.units == "mm");
    CHECK(g.date == f.date);
    CHECK(g.lead == 7);
    CHECK(g.grid == f.grid);
    CHECK(encode_field(g) == bytes);
  }

  TEST_CASE("payload is little-endian float32 after the header") {
    auto f = field_2x2();
    f.values = {1.5, -2.0, 0.1, 3.0};
    const auto bytes = encode_field(f);
    std::uint32_t len = 0;
    for (int i = 3; i >= 0; --i) len = (len << 8) | bytes[4 + i];
    CHECK(bytes.size() == 8 + len + 16);
    const std::size_t off = 8 + len + 8;  // third value
    std::uint32_t bits = 0;
    for (int i = 3; i >= 0; --i) bits = (bits << 8) | bytes[off + i];
    float v;
    std::memcpy(&v, &bits, 4);
    CHECK(v == 0.1f);
    CHECK(decode_field(bytes).values[2] == double(0.1f));
  }

  TEST_CASE("file round trip") {
    const auto dir = temp_dir("field_rt");
    const auto f = field_2x2();
    write_field(f, dir / "a.qwf");
    CHECK(read_field(dir / "a.qwf").values == f.values);
    write_field(f, dir / "b.qwf");
    std::ifstream a(dir / "a.qwf", std::ios::binary), b(dir / "b.qwf", std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
    CHECK(sa == sb);
  }

  TEST_CASE("bad magic") {
    auto bytes = encode_field(field_2x2());
    std::memcpy(bytes.data(), "XXXX", 4);
    CHECK(kind_of([&] { decode_field(bytes); }) == ErrorKind::bad_magic);
  }

  TEST_CASE("header declaring 3x3 with a 2x2 payload") {
    auto f3 = field_2x2();
    f3.grid = LatLonGrid({45.0, 0.0, -45.0}, 3);
    f3.values.assign(9, 0.0);
    auto bytes = encode_field(f3);
    bytes.resize(bytes.size() - 5 * 4);
    CHECK(kind_of([&] { decode_field(bytes); }) == ErrorKind::dim_mismatch);
  }

  TEST_CASE("truncated inputs") {
    const auto bytes = encode_field(field_2x2());
    std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + 6);
    CHECK(kind_of([&] { decode_field(cut); }) == ErrorKind::truncated);
    std::vector<std::uint8_t> header_cut(bytes.begin(), bytes.begin() + 20);
    CHECK(kind_of([&] { decode_field(header_cut); }) == ErrorKind::truncated);
  }

  TEST_CASE("non-ISO date in the header") {
    auto bytes = encode_field(field_2x2());
    const std::string iso = "2022-03-14";
    auto it = std::search(bytes.begin(), bytes.end(), iso.begin(), iso.end());
    REQUIRE(it != bytes.end());
    const std::string bad = "2022/03/14";
    std::copy(bad.begin(), bad.end(), it);
    CHECK(kind_of([&] { decode_field(bytes); }) == ErrorKind::bad_date);
  }

  TEST_CASE("non-finite payload is refused on write") {
    auto f = field_2x2();
    f.values[1] = std::numeric_limits<double>::infinity();
    CHECK(kind_of([&] { encode_field(f); }) == ErrorKind::non_finite);
  }

  TEST_CASE("catalog lookups") {
    const auto dir = temp_dir("catalog");
    Catalog cat(dir);
    const auto f = field_2x2();
    cat.write(f);
    const FieldKey key{"precip", f.date, 7};
    CHECK(cat.contains(key));
    CHECK(cat.read(key).values == f.values);
    CHECK(kind_of([&] { cat.lookup({"precip", f.date, 8}); }) == ErrorKind::missing_data);
    const auto reopened = Catalog::open(dir);
    CHECK(reopened.size() == 1);
    CHECK(reopened.keys().front() == key);
  }

  TEST_CASE("archive save and load") {
    const auto dir = temp_dir("archive");
    FieldArchive a;
    auto f = field_2x2();
    a.put(f);
    f.date = f.date.plus_days(1);
    f.values = {4, 5, 6, 7};
    a.put(f);
    a.save(dir);
    const auto b = FieldArchive::load(dir);
    CHECK(b.size() == 2);
    CHECK(b.get("precip", f.date, 7).values == f.values);
  }
}

TEST_SUITE("calendar") {
  TEST_CASE("ISO parsing") {
    CHECK(Date::parse("2022-01-03").iso() == "2022-01-03");
    CHECK(kind_of([] { Date::parse("2022-02-30"); }) == ErrorKind::bad_date);
    CHECK(kind_of([] { Date::parse("22-1-3"); }) == ErrorKind::bad_date);
    CHECK(Date::parse("2020-02-29").day_of_year() == 60);
  }

  TEST_CASE("104 Monday and Thursday initialisations in 2022") {
    const auto d = monday_thursday_inits(2022);
    CHECK(d.size() == 104);
    for (const auto& x : d) CHECK((x.weekday() == 1 || x.weekday() == 4));
    CHECK(d.front() == Date(2022, 1, 3));
    CHECK(d.back() == Date(2022, 12, 29));
  }

  TEST_CASE("leap day maps to Feb 28 in other years") {
    CHECK(Date(2020, 2, 29).with_year(2021) == Date(2021, 2, 28));
    CHECK(Date(2020, 2, 29).with_year(2016) == Date(2016, 2, 29));
    CHECK(is_leap_year(2000));
    CHECK(!is_leap_year(1900));
  }
}

TEST_SUITE("config") {
  TEST_CASE("empty overrides give the defaults") {
    const auto c = config_from_json(nlohmann::json::object());
    CHECK(c.loss.lambda_rps == 0.5);
    CHECK(c.loss.lambda_ce == 0.1);
    CHECK(c.loss.lambda_kl == 5e-4);
    CHECK(c.lr == 2e-4);
    CHECK(c.model.tau_init == 1.0);
    CHECK(c.model.num_bins == 5);
    CHECK(c.members == 8);
    CHECK(c.clim_years.first == 2002);
    CHECK(c.clim_years.last == 2021);
    CHECK(c.test_years.first == 2022);
  }

  TEST_CASE("K = 1 is rejected") {
    CHECK(kind_of([] { config_from_json({{"num_bins", 1}}); }) == ErrorKind::validation);
  }

  TEST_CASE("climatology period must not overlap the test period") {
    CHECK(kind_of([] { config_from_json({{"clim_years", {2002, 2022}}}); }) == ErrorKind::validation);
    CHECK_NOTHROW(config_from_json({{"clim_years", {2002, 2021}}, {"test_years", 2022}}));
  }

  TEST_CASE("unknown keys are rejected and round trip is stable") {
    CHECK_THROWS_AS(config_from_json({{"learning_rate", 1e-3}}), Error);
    RunConfig c;
    c.lr = 1e-3;
    c.phase2 = {10, 12};
    const auto j = to_json(c);
    CHECK(to_json(config_from_json(j)) == j);
  }

  TEST_CASE("load_config reads a file; an empty file gives defaults") {
    const auto dir = temp_dir("config");
    { std::ofstream(dir / "empty.json") << ""; }
    { std::ofstream(dir / "m.json") << R"({"members": 3})"; }
    CHECK(load_config(dir / "empty.json").members == 8);
    CHECK(load_config(dir / "m.json").members == 3);
  }

  TEST_CASE("training fingerprint ignores evaluation-only keys") {
    RunConfig a, b;
    b.members = 3;
    b.bootstrap_resamples = 10;
    CHECK(training_fingerprint(a) == training_fingerprint(b));
    b.lr = 1e-3;
    CHECK(training_fingerprint(a) != training_fingerprint(b));
  }
}
