#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "qw/calendar.hpp"
#include "qw/grid.hpp"

namespace qw {

/// One variable on a lat-lon grid at one date (and optional lead step).
/// Values are row-major [lat, lon], held in 64-bit and stored in 32-bit.
struct GridField {
  std::string variable;
  std::string units;
  LatLonGrid grid;
  Date date;
  int lead = 0;
  std::vector<double> values;
};

inline constexpr char kFieldMagic[4] = {'Q', 'W', 'F', '1'};

/// Writes the "QWF1" layout: magic, u32 LE header length, JSON header,
/// little-endian float32 payload.
void write_field(const GridField& field, const std::filesystem::path& path);
GridField read_field(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_field(const GridField& field);
GridField decode_field(std::span<const std::uint8_t> bytes);

struct FieldKey {
  std::string variable;
  Date date;
  int lead = 0;

  auto operator<=>(const FieldKey&) const = default;
  std::string str() const;
};

/// On-disk layout: <root>/<variable>/<YYYY-MM-DD>_L<lead>.qwf
class Catalog {
 public:
  explicit Catalog(std::filesystem::path root) : root_(std::move(root)) {}

  /// Scans an existing directory tree.
  static Catalog open(const std::filesystem::path& root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path path_for(const FieldKey& key) const;

  void declare(const FieldKey& key);
  bool contains(const FieldKey& key) const { return entries_.count(key) != 0; }
  /// Throws missing_data for undeclared keys.
  const std::filesystem::path& lookup(const FieldKey& key) const;
  std::vector<FieldKey> keys() const;
  std::size_t size() const { return entries_.size(); }

  GridField read(const FieldKey& key) const { return read_field(lookup(key)); }
  void write(const GridField& field);

 private:
  std::filesystem::path root_;
  std::map<FieldKey, std::filesystem::path> entries_;
};

/// In-memory keyed collection of fields, persisted through a Catalog.
class FieldArchive {
 public:
  void put(GridField field);
  bool contains(const FieldKey& key) const { return fields_.count(key) != 0; }
  const GridField& get(const FieldKey& key) const;
  const GridField& get(const std::string& variable, const Date& date,
                       int lead = 0) const {
    return get(FieldKey{variable, date, lead});
  }
  std::size_t size() const { return fields_.size(); }
  const std::map<FieldKey, GridField>& fields() const { return fields_; }

  void save(const std::filesystem::path& root) const;
  static FieldArchive load(const std::filesystem::path& root);

 private:
  std::map<FieldKey, GridField> fields_;
};

bool is_valid_variable_name(const std::string& name);

}  // namespace qw
