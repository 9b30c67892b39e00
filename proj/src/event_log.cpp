#include "cdrpm/event_log.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "cdrpm/error.hpp"
#include "json.hpp"

namespace cdrpm {

std::vector<std::string> Trace::activities() const {
  std::vector<std::string> out;
  out.reserve(events.size());
  for (const auto& e : events) out.push_back(e.activity);
  return out;
}

void CaseLog::validate() const {
  for (const auto& t : traces) {
    if (t.events.empty()) throw Error(Errc::invalid_input, "case " + t.case_id + " has no events");
    for (std::size_t i = 1; i < t.events.size(); ++i) {
      if (t.events[i].timestamp < t.events[i - 1].timestamp) {
        throw Error(Errc::invalid_input, "case " + t.case_id + " is not time-ordered");
      }
    }
  }
}

std::set<std::string> CaseLog::alphabet() const {
  std::set<std::string> out;
  for (const auto& t : traces) {
    for (const auto& e : t.events) out.insert(e.activity);
  }
  return out;
}

std::size_t CaseLog::event_count() const {
  std::size_t n = 0;
  for (const auto& t : traces) n += t.events.size();
  return n;
}

void Ocel::canonicalize() {
  std::sort(object_types.begin(), object_types.end());
  object_types.erase(std::unique(object_types.begin(), object_types.end()), object_types.end());
  std::sort(objects.begin(), objects.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (auto& e : events) {
    std::sort(e.relations.begin(), e.relations.end(), [](const auto& a, const auto& b) {
      return std::tie(a.object_id, a.qualifier) < std::tie(b.object_id, b.qualifier);
    });
  }
  std::sort(events.begin(), events.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
}

void Ocel::validate() const {
  const std::set<std::string> types(object_types.begin(), object_types.end());
  std::unordered_set<std::string> object_ids;
  for (const auto& o : objects) {
    if (!object_ids.insert(o.id).second) throw Error(Errc::invalid_input, "duplicate object id " + o.id);
    if (!types.count(o.type)) throw Error(Errc::invalid_input, "object " + o.id + " has undeclared type " + o.type);
  }
  std::unordered_set<std::string> event_ids;
  for (const auto& e : events) {
    if (!event_ids.insert(e.id).second) throw Error(Errc::invalid_input, "duplicate event id " + e.id);
    for (const auto& r : e.relations) {
      if (!object_ids.count(r.object_id)) {
        throw Error(Errc::invalid_input, "event " + e.id + " relates to unknown object " + r.object_id);
      }
    }
  }
}

std::size_t Ocel::relation_count() const {
  std::size_t n = 0;
  for (const auto& e : events) n += e.relations.size();
  return n;
}

CaseLogBuild build_case_log(std::span<const Trip> trips, std::span<const Staypoint> staypoints,
                            const RegionIndex& regions, RegionLevel level) {
  std::unordered_map<std::string_view, const Staypoint*> by_id;
  for (const auto& sp : staypoints) by_id.emplace(sp.staypoint_id, &sp);

  std::vector<const Trip*> order;
  for (const auto& t : trips) order.push_back(&t);
  std::sort(order.begin(), order.end(), [](const Trip* a, const Trip* b) { return a->trip_id < b->trip_id; });

  auto label = [&](const std::string& region_id) {
    const Region* r = regions.find(region_id);
    return r ? r->name : region_id;
  };

  CaseLogBuild out;
  for (const Trip* trip : order) {
    if (trip->triplegs.empty()) continue;
    std::vector<const Staypoint*> chain;
    bool missing = false;
    auto lookup = [&](const std::string& id) -> const Staypoint* {
      const auto it = by_id.find(id);
      if (it == by_id.end()) {
        out.dropped.push_back({trip->trip_id, id, "unknown staypoint"});
        missing = true;
        return nullptr;
      }
      return it->second;
    };
    chain.push_back(lookup(trip->triplegs.front().origin_staypoint));
    for (const auto& leg : trip->triplegs) chain.push_back(lookup(leg.dest_staypoint));
    if (missing) continue;

    const auto& first = chain.front()->region(level);
    const auto& last = chain.back()->region(level);
    if (!first || !last) {
      const Staypoint* bad = first ? chain.back() : chain.front();
      out.dropped.push_back({trip->trip_id, bad->staypoint_id, "no " + std::string(to_string(level)) + " region"});
      continue;
    }

    Trace trace{trip->trip_id, {}};
    trace.events.push_back({label(*first), trip->t_start});
    for (std::size_t i = 1; i + 1 < chain.size(); ++i) {
      const auto& region = chain[i]->region(level);
      if (!region) continue;
      std::string activity = label(*region);
      if (activity != trace.events.back().activity) trace.events.push_back({std::move(activity), chain[i]->t_start});
    }
    trace.events.push_back({label(*last), trip->t_end});
    out.log.traces.push_back(std::move(trace));
  }
  out.log.validate();
  return out;
}

OcelBuild build_ocel(std::span<const Trip> trips, std::span<const Staypoint> staypoints, const RegionIndex& regions,
                     RegionLevel level) {
  auto cases = build_case_log(trips, staypoints, regions, level);
  std::unordered_map<std::string_view, const Trip*> trip_of;
  for (const auto& t : trips) trip_of.emplace(t.trip_id, &t);

  OcelBuild out;
  out.dropped = std::move(cases.dropped);
  Ocel& ocel = out.ocel;
  std::set<std::string> types;
  std::set<std::string> modes_used;
  for (std::size_t c = 0; c < cases.log.traces.size(); ++c) {
    const Trace& trace = cases.log.traces[c];
    const std::string mode{display_name(trip_of.at(trace.case_id)->primary_mode())};
    types.insert(mode);
    modes_used.insert(mode);
    ocel.objects.push_back({trace.case_id, mode});
    for (std::size_t i = 0; i < trace.events.size(); ++i) {
      ocel.events.push_back({"e" + std::to_string(c) + "_" + std::to_string(i), trace.events[i].activity,
                             trace.events[i].timestamp, {{trace.case_id, "trip"}, {mode, "mode"}}});
    }
  }
  if (!modes_used.empty()) types.insert(std::string(kModeObjectType));
  for (const auto& m : modes_used) ocel.objects.push_back({m, std::string(kModeObjectType)});
  ocel.object_types.assign(types.begin(), types.end());
  ocel.canonicalize();
  ocel.validate();
  return out;
}

LogStats compute_stats(const CaseLog& log) {
  std::set<std::vector<std::string>> variants;
  for (const auto& t : log.traces) variants.insert(t.activities());
  return {log.traces.size(), log.event_count(), variants.size(), std::nullopt};
}

LogStats compute_stats(const Ocel& ocel) {
  return {ocel.objects.size(), ocel.events.size(), ocel.object_types.size(), ocel.relation_count()};
}

std::string write_case_log(const CaseLog& log) {
  struct Row {
    const std::string* case_id;
    const LogEvent* event;
  };
  std::vector<Row> rows;
  for (const auto& t : log.traces) {
    for (const auto& e : t.events) rows.push_back({&t.case_id, &e});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (*a.case_id != *b.case_id) return *a.case_id < *b.case_id;
    return a.event->timestamp < b.event->timestamp;
  });
  std::ostringstream out;
  csv::write_row(out, {"case_id", "activity", "timestamp"});
  for (const auto& r : rows) csv::write_row(out, {*r.case_id, r.event->activity, format_iso8601(r.event->timestamp)});
  return out.str();
}

CaseLog parse_case_log(std::string_view csv_text, const std::string& source) {
  std::istringstream in{std::string(csv_text)};
  const auto table = csv::Table::parse(in, source, {"case_id", "activity", "timestamp"});
  CaseLog log;
  std::unordered_map<std::string, std::size_t> slot;
  for (const auto& r : table.rows()) {
    auto [it, fresh] = slot.emplace(r[0], log.traces.size());
    if (fresh) log.traces.push_back({r[0], {}});
    log.traces[it->second].events.push_back({r[1], parse_iso8601(r[2])});
  }
  log.validate();
  return log;
}

CaseLog read_case_log(const std::filesystem::path& path) { return parse_case_log(read_file(path), path.string()); }

std::string write_ocel(const Ocel& ocel) {
  using ojson = nlohmann::ordered_json;
  ojson doc;
  doc["objectTypes"] = ojson::array();
  for (const auto& t : ocel.object_types) doc["objectTypes"].push_back({{"name", t}});
  doc["objects"] = ojson::array();
  for (const auto& o : ocel.objects) {
    ojson obj;
    obj["id"] = o.id;
    obj["type"] = o.type;
    doc["objects"].push_back(std::move(obj));
  }
  doc["events"] = ojson::array();
  for (const auto& e : ocel.events) {
    ojson ev;
    ev["id"] = e.id;
    ev["activity"] = e.activity;
    ev["timestamp"] = format_iso8601(e.timestamp);
    ev["relations"] = ojson::array();
    for (const auto& r : e.relations) {
      ojson rel;
      rel["objectId"] = r.object_id;
      rel["qualifier"] = r.qualifier;
      ev["relations"].push_back(std::move(rel));
    }
    doc["events"].push_back(std::move(ev));
  }
  return doc.dump(1) + "\n";
}

Ocel parse_ocel(std::string_view json_text, const std::string& source) {
  Ocel ocel;
  try {
    const auto doc = nlohmann::json::parse(json_text);
    for (const auto& t : doc.at("objectTypes")) ocel.object_types.push_back(t.at("name").get<std::string>());
    for (const auto& o : doc.at("objects")) {
      ocel.objects.push_back({o.at("id").get<std::string>(), o.at("type").get<std::string>()});
    }
    for (const auto& e : doc.at("events")) {
      OcelEvent ev{e.at("id").get<std::string>(), e.at("activity").get<std::string>(),
                   parse_iso8601(e.at("timestamp").get<std::string>()), {}};
      for (const auto& r : e.at("relations")) {
        ev.relations.push_back({r.at("objectId").get<std::string>(), r.value("qualifier", "")});
      }
      ocel.events.push_back(std::move(ev));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(Errc::invalid_input, source + ": " + ex.what());
  }
  ocel.canonicalize();
  ocel.validate();
  return ocel;
}

Ocel read_ocel(const std::filesystem::path& path) { return parse_ocel(read_file(path), path.string()); }

std::string write_dropped(std::span<const DroppedTrip> dropped) {
  std::ostringstream out;
  csv::write_row(out, {"trip_id", "staypoint_id", "reason"});
  for (const auto& d : dropped) csv::write_row(out, {d.trip_id, d.staypoint_id, d.reason});
  return out.str();
}

std::string write_stats_json(const LogStats& case_stats, const std::optional<LogStats>& ocel_stats) {
  using ojson = nlohmann::ordered_json;
  ojson doc;
  doc["case_log"] = {{"n_cases", case_stats.n_cases_or_objects},
                     {"n_events", case_stats.n_events},
                     {"n_variants", case_stats.n_variants_or_object_types}};
  if (ocel_stats) {
    doc["ocel"] = {{"n_objects", ocel_stats->n_cases_or_objects},
                   {"n_events", ocel_stats->n_events},
                   {"n_object_types", ocel_stats->n_variants_or_object_types},
                   {"n_relations", ocel_stats->n_relations.value_or(0)}};
  }
  return doc.dump(2) + "\n";
}

}  // namespace cdrpm
