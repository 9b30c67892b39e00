#include "cdrpm/validation.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_map>

#include <boost/math/distributions/students_t.hpp>

#include "cdrpm/error.hpp"
#include "json.hpp"

namespace cdrpm {

namespace {

struct Endpoints {
  std::unordered_map<std::string_view, const Staypoint*> by_id;
  explicit Endpoints(std::span<const Staypoint> staypoints) {
    for (const auto& sp : staypoints) by_id.emplace(sp.staypoint_id, &sp);
  }
};

// Returns false (and records the drop) when an endpoint is unresolved.
bool od_cell(const Trip& trip, const Endpoints& ep, const RegionIndex& regions, RegionLevel level,
             std::pair<std::string, std::string>& cell, std::vector<DroppedTrip>& dropped) {
  auto resolve = [&](const std::string& sp_id, std::string& name) {
    const auto it = ep.by_id.find(sp_id);
    if (it == ep.by_id.end()) {
      dropped.push_back({trip.trip_id, sp_id, "unknown staypoint"});
      return false;
    }
    const auto& region = it->second->region(level);
    if (!region) {
      dropped.push_back({trip.trip_id, sp_id, "no " + std::string(to_string(level)) + " region"});
      return false;
    }
    const Region* r = regions.find(*region);
    name = r ? r->name : *region;
    return true;
  };
  return resolve(trip.origin, cell.first) && resolve(trip.destination, cell.second);
}

}  // namespace

OdBuild build_od_matrix(std::span<const Trip> trips, std::span<const Staypoint> staypoints,
                        const RegionIndex& regions, RegionLevel level) {
  const Endpoints ep(staypoints);
  OdBuild out;
  out.od.level = level;
  std::pair<std::string, std::string> cell;
  for (const auto& trip : trips) {
    if (!od_cell(trip, ep, regions, level, cell, out.dropped)) continue;
    ++out.od.counts[cell];
    ++out.od.total;
  }
  return out;
}

OdBuild build_od_matrix_parallel(std::span<const Trip> trips, std::span<const Staypoint> staypoints,
                                 const RegionIndex& regions, RegionLevel level) {
  const Endpoints ep(staypoints);
  const auto n = static_cast<std::int64_t>(trips.size());
  std::vector<std::vector<DroppedTrip>> drops(trips.size());
  OdBuild out;
  out.od.level = level;
#pragma omp parallel
  {
    std::map<std::pair<std::string, std::string>, std::size_t> local;
    std::pair<std::string, std::string> cell;
#pragma omp for schedule(static) nowait
    for (std::int64_t i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      if (od_cell(trips[k], ep, regions, level, cell, drops[k])) ++local[cell];
    }
#pragma omp critical(cdrpm_od_merge)
    for (const auto& [c, v] : local) {
      out.od.counts[c] += v;
      out.od.total += v;
    }
  }
  for (auto& d : drops) out.dropped.insert(out.dropped.end(), d.begin(), d.end());
  return out;
}

RegressionResult linear_regression(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(Errc::degenerate_input, "x and y differ in length");
  const std::size_t n = x.size();
  if (n < 2) throw Error(Errc::degenerate_input, "regression needs at least 2 points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0) throw Error(Errc::degenerate_input, "x is constant");

  RegressionResult res;
  res.n = n;
  res.slope = sxy / sxx;
  res.intercept = my - res.slope * mx;
  if (syy == 0.0) {
    res.y_constant = true;
    res.r = 0.0;
  } else {
    res.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  }
  res.r_squared = res.r * res.r;
  if (n >= 3) {
    double ssr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = y[i] - (res.intercept + res.slope * x[i]);
      ssr += e * e;
    }
    const double df = static_cast<double>(n - 2);
    const double se = std::sqrt(ssr / df / sxx);
    if (se == 0.0) {
      res.p_value = res.slope == 0.0 ? 1.0 : 0.0;
    } else {
      const double t = std::abs(res.slope / se);
      const boost::math::students_t dist(df);
      res.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, t));
    }
  }
  return res;
}

namespace {

bool is_intra(std::string_view c) { return c == "intra" || c == "intra-municipal" || c == "intra-parish"; }
bool is_other(std::string_view c) { return c == "other" || c == "others"; }

std::string canonical(const AliasMap& aliases, const std::string& name) {
  const auto it = aliases.find(name);
  return it == aliases.end() ? name : it->second;
}

}  // namespace

ShareComparison compare_shares(const OdMatrix& od, std::span<const std::pair<std::string, double>> survey,
                               const ShareOptions& options, std::span<const SurveyPair> survey_pairs) {
  double sum = 0.0;
  std::set<std::string> seen;
  bool has_intra = false, has_other = false;
  std::map<std::string, std::size_t> named;  // destination name -> class row
  ShareComparison out;
  out.origin = options.origin;
  for (const auto& [name, share] : survey) {
    if (!(share >= 0.0)) throw Error(Errc::class_mismatch, "negative share for class " + name);
    sum += share;
    const std::string key = is_intra(name) ? "intra" : is_other(name) ? "other" : canonical(options.aliases, name);
    if (!seen.insert(key).second) throw Error(Errc::class_mismatch, "class " + name + " appears twice");
    has_intra |= key == "intra";
    has_other |= key == "other";
    if (key != "intra" && key != "other") named.emplace(key, out.classes.size());
    out.classes.push_back({name, share, 0.0, 0, 0.0, 0.0});
  }
  if (std::abs(sum - 1.0) > 1e-6) throw Error(Errc::class_mismatch, "survey shares sum to " + format_double(sum));

  auto row_of = [&](std::string_view key) -> std::size_t {
    for (std::size_t i = 0; i < out.classes.size(); ++i) {
      const auto& n = out.classes[i].name;
      if ((key == "intra" && is_intra(n)) || (key == "other" && is_other(n))) return i;
    }
    return out.classes.size();
  };
  const std::size_t intra_row = has_intra ? row_of("intra") : out.classes.size();
  const std::size_t other_row = has_other ? row_of("other") : out.classes.size();

  const std::optional<std::string> origin =
      options.origin ? std::optional<std::string>(canonical(options.aliases, *options.origin)) : std::nullopt;
  for (const auto& [cell, count] : od.counts) {
    if (origin && cell.first != *origin) continue;
    std::size_t row = out.classes.size();
    if (cell.first == cell.second && has_intra) {
      row = intra_row;
    } else if (const auto it = named.find(cell.second); it != named.end()) {
      row = it->second;
    } else if (has_other) {
      row = other_row;
    }
    if (row == out.classes.size()) {
      throw Error(Errc::class_mismatch,
                  "destination " + cell.second + " (from " + cell.first + ") falls in no survey class");
    }
    out.classes[row].measured_trips += count;
    out.total += count;
  }
  for (auto& c : out.classes) {
    c.measured_share = out.total ? static_cast<double>(c.measured_trips) / static_cast<double>(out.total) : 0.0;
    c.deviation_pp = (c.measured_share - c.survey_share) * 100.0;
    c.relative_deviation = c.survey_share > 0.0 ? (c.measured_share - c.survey_share) / c.survey_share : 0.0;
  }
  if (!survey_pairs.empty()) regress_pairs(od, survey_pairs, options.aliases, out);
  return out;
}

void regress_pairs(const OdMatrix& od, std::span<const SurveyPair> survey_pairs, const AliasMap& aliases,
                   ShareComparison& into) {
  into.pairs.clear();
  for (const auto& p : survey_pairs) {
    const std::pair<std::string, std::string> key{canonical(aliases, p.origin), canonical(aliases, p.destination)};
    const auto it = od.counts.find(key);
    into.pairs.push_back({key.first, key.second, p.trips, it == od.counts.end() ? 0.0 : static_cast<double>(it->second)});
  }
  std::vector<double> x, y;
  for (const auto& p : into.pairs) {
    x.push_back(p.survey);
    y.push_back(p.measured);
  }
  into.regression = linear_regression(x, y);
  if (into.pairs.size() < 4) return;
  std::size_t worst = 0;
  double worst_abs = -1.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = std::abs(y[i] - (into.regression->intercept + into.regression->slope * x[i]));
    if (e > worst_abs) {
      worst_abs = e;
      worst = i;
    }
  }
  into.outlier = into.pairs[worst];
  x.erase(x.begin() + static_cast<std::ptrdiff_t>(worst));
  y.erase(y.begin() + static_cast<std::ptrdiff_t>(worst));
  try {
    into.regression_without_outlier = linear_regression(x, y);
  } catch (const Error&) {
    into.regression_without_outlier.reset();
  }
}

SurveyFile read_survey(const std::filesystem::path& path) {
  const auto table = csv::Table::read(path);
  SurveyFile out;
  if (table.header() == csv::Row{"class", "share"}) {
    for (const auto& r : table.rows()) out.shares.emplace_back(r[0], parse_double(r[1]));
  } else if (table.header() == csv::Row{"origin", "destination", "trips"}) {
    for (const auto& r : table.rows()) out.pairs.push_back({r[0], r[1], parse_double(r[2])});
  } else {
    throw Error(Errc::invalid_input, path.string() + ": expected header 'class,share' or 'origin,destination,trips'");
  }
  return out;
}

AliasMap read_aliases(const std::filesystem::path& path) {
  const auto table = csv::Table::read(path, {"alias", "region"});
  AliasMap out;
  for (const auto& r : table.rows()) out[r[0]] = r[1];
  return out;
}

std::string write_od_matrix(const OdMatrix& od) {
  std::ostringstream out;
  csv::write_row(out, {"origin", "destination", "trips"});
  for (const auto& [cell, count] : od.counts) csv::write_row(out, {cell.first, cell.second, std::to_string(count)});
  return out.str();
}

namespace {
using ojson = nlohmann::ordered_json;

ojson regression_obj(const RegressionResult& r) {
  ojson o;
  o["slope"] = r.slope;
  o["intercept"] = r.intercept;
  o["r"] = r.r;
  o["r_squared"] = r.r_squared;
  o["p_value"] = r.p_value ? ojson(*r.p_value) : ojson(nullptr);
  o["n"] = r.n;
  o["y_constant"] = r.y_constant;
  return o;
}
}  // namespace

std::string regression_json(const RegressionResult& r) { return regression_obj(r).dump(2) + "\n"; }

std::string write_validation_json(const ShareComparison& c) {
  ojson doc;
  doc["origin"] = c.origin ? ojson(*c.origin) : ojson(nullptr);
  doc["total_trips"] = c.total;
  doc["classes"] = ojson::array();
  for (const auto& row : c.classes) {
    ojson o;
    o["class"] = row.name;
    o["survey_share"] = row.survey_share;
    o["measured_share"] = row.measured_share;
    o["measured_trips"] = row.measured_trips;
    o["deviation_pp"] = row.deviation_pp;
    o["relative_deviation"] = row.relative_deviation;
    doc["classes"].push_back(std::move(o));
  }
  doc["regression"] = c.regression ? regression_obj(*c.regression) : ojson(nullptr);
  doc["regression_without_outlier"] =
      c.regression_without_outlier ? regression_obj(*c.regression_without_outlier) : ojson(nullptr);
  if (c.outlier) {
    doc["outlier"] = {{"origin", c.outlier->origin},
                      {"destination", c.outlier->destination},
                      {"survey", c.outlier->survey},
                      {"measured", c.outlier->measured}};
  } else {
    doc["outlier"] = nullptr;
  }
  doc["pairs"] = ojson::array();
  for (const auto& p : c.pairs) {
    doc["pairs"].push_back(
        {{"origin", p.origin}, {"destination", p.destination}, {"survey", p.survey}, {"measured", p.measured}});
  }
  return doc.dump(2) + "\n";
}

}  // namespace cdrpm
