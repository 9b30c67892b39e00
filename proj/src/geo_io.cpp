#include <sstream>

#include "cdrpm/error.hpp"
#include "cdrpm/geo.hpp"
#include "json.hpp"

namespace cdrpm {

using nlohmann::json;

std::vector<TowerSector> read_towers(const std::filesystem::path& path) {
  const auto table =
      csv::Table::read(path, {"cell_id", "lat", "lon", "azimuth_deg", "beamwidth_deg", "radius_m"});
  std::vector<TowerSector> out;
  out.reserve(table.rows().size());
  for (const auto& row : table.rows()) {
    TowerSector s{row[0], {parse_double(row[1]), parse_double(row[2])}, parse_double(row[3]),
                  parse_double(row[4]), parse_double(row[5])};
    s.validate();
    out.push_back(std::move(s));
  }
  return out;
}

std::string write_towers(std::span<const TowerSector> towers) {
  std::ostringstream out;
  csv::write_row(out, {"cell_id", "lat", "lon", "azimuth_deg", "beamwidth_deg", "radius_m"});
  for (const auto& t : towers) {
    csv::write_row(out, {t.cell_id, format_double(t.center.lat), format_double(t.center.lon),
                         format_double(t.azimuth_deg), format_double(t.beamwidth_deg), format_double(t.radius_m)});
  }
  return out.str();
}

namespace {

Ring parse_ring(const json& coords, const std::string& where) {
  Ring ring;
  for (const auto& c : coords) {
    if (!c.is_array() || c.size() < 2) throw Error(Errc::invalid_input, where + ": bad coordinate");
    ring.push_back({c[1].get<double>(), c[0].get<double>()});
  }
  return ring;
}

}  // namespace

std::vector<Region> parse_regions(std::string_view geojson, const std::string& source) {
  json doc;
  try {
    doc = json::parse(geojson);
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_input, source + ": " + e.what());
  }
  if (doc.value("type", "") != "FeatureCollection" || !doc.contains("features")) {
    throw Error(Errc::invalid_input, source + ": expected a GeoJSON FeatureCollection");
  }
  std::vector<Region> out;
  try {
    for (const auto& f : doc.at("features")) {
      const auto& props = f.at("properties");
      Region r;
      r.region_id = props.at("region_id").get<std::string>();
      r.name = props.value("name", r.region_id);
      r.level = props.contains("level") ? parse_region_level(props.at("level").get<std::string>())
                                        : RegionLevel::municipality;
      if (props.contains("parent_id") && !props.at("parent_id").is_null()) {
        r.parent_id = props.at("parent_id").get<std::string>();
      }
      const auto& geom = f.at("geometry");
      const auto type = geom.at("type").get<std::string>();
      const std::string where = source + ": region " + r.region_id;
      if (type == "Polygon") {
        for (const auto& ring : geom.at("coordinates")) r.boundary.push_back(parse_ring(ring, where));
      } else if (type == "MultiPolygon") {
        for (const auto& poly : geom.at("coordinates")) {
          for (const auto& ring : poly) r.boundary.push_back(parse_ring(ring, where));
        }
      } else {
        throw Error(Errc::invalid_input, where + ": unsupported geometry " + type);
      }
      r.validate();
      out.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_input, source + ": " + e.what());
  }
  return out;
}

std::vector<Region> read_regions(const std::filesystem::path& path) {
  return parse_regions(read_file(path), path.string());
}

std::string write_regions(std::span<const Region> regions) {
  using ojson = nlohmann::ordered_json;
  ojson features = ojson::array();
  for (const auto& r : regions) {
    ojson rings = ojson::array();
    for (const auto& ring : r.boundary) {
      ojson coords = ojson::array();
      for (const auto& v : ring) coords.push_back(ojson::array({v.lon, v.lat}));
      rings.push_back(std::move(coords));
    }
    ojson feature;
    feature["type"] = "Feature";
    feature["properties"]["region_id"] = r.region_id;
    feature["properties"]["name"] = r.name;
    feature["properties"]["level"] = std::string(to_string(r.level));
    feature["properties"]["parent_id"] = r.parent_id ? ojson(*r.parent_id) : ojson(nullptr);
    feature["geometry"]["type"] = "Polygon";
    feature["geometry"]["coordinates"] = std::move(rings);
    features.push_back(std::move(feature));
  }
  ojson doc;
  doc["type"] = "FeatureCollection";
  doc["features"] = std::move(features);
  return doc.dump() + "\n";
}

std::vector<CdrEvent> read_cdr(const std::filesystem::path& path) {
  const auto table = csv::Table::read(path, {"user_id", "timestamp", "cell_id"});
  std::vector<CdrEvent> out;
  out.reserve(table.rows().size());
  for (const auto& row : table.rows()) out.push_back({row[0], parse_iso8601(row[1]), row[2]});
  return out;
}

std::string write_cdr(std::span<const CdrEvent> events) {
  std::ostringstream out;
  csv::write_row(out, {"user_id", "timestamp", "cell_id"});
  for (const auto& e : events) csv::write_row(out, {e.user_id, format_iso8601(e.timestamp), e.cell_id});
  return out.str();
}

std::vector<PositionedEvent> read_positioned(const std::filesystem::path& path) {
  const auto table = csv::Table::read(path, {"user_id", "timestamp", "cell_id", "lat", "lon"});
  std::vector<PositionedEvent> out;
  out.reserve(table.rows().size());
  for (const auto& row : table.rows()) {
    out.push_back({row[0], parse_iso8601(row[1]), row[2], {parse_double(row[3]), parse_double(row[4])}});
  }
  return out;
}

std::string write_positioned(std::span<const PositionedEvent> events) {
  std::ostringstream out;
  csv::write_row(out, {"user_id", "timestamp", "cell_id", "lat", "lon"});
  for (const auto& e : events) {
    csv::write_row(out, {e.user_id, format_iso8601(e.timestamp), e.cell_id, format_double(e.location.lat),
                         format_double(e.location.lon)});
  }
  return out.str();
}

}  // namespace cdrpm
