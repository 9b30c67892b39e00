#include "cdrpm/discovery.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "cdrpm/error.hpp"
#include "json.hpp"

namespace cdrpm {

std::size_t Dfg::trace_count() const {
  std::size_t n = 0;
  for (const auto& [a, c] : start_counts) n += c;
  return n;
}

namespace {

void count_trace(const Trace& t, Dfg& dfg) {
  if (t.events.empty()) return;
  ++dfg.start_counts[t.events.front().activity];
  ++dfg.end_counts[t.events.back().activity];
  for (std::size_t i = 0; i < t.events.size(); ++i) {
    ++dfg.nodes[t.events[i].activity];
    if (i + 1 < t.events.size()) ++dfg.arcs[{t.events[i].activity, t.events[i + 1].activity}].frequency;
  }
}

template <class Map>
void add_counts(Map& into, const Map& from) {
  for (const auto& [k, v] : from) into[k] += v;
}

void merge_into(Dfg& into, const Dfg& from) {
  add_counts(into.nodes, from.nodes);
  add_counts(into.start_counts, from.start_counts);
  add_counts(into.end_counts, from.end_counts);
  for (const auto& [k, a] : from.arcs) into.arcs[k].frequency += a.frequency;
}

void require_non_empty(const CaseLog& log) {
  if (log.traces.empty()) throw Error(Errc::empty_log, "cannot discover a model from an empty log");
}

}  // namespace

Dfg discover_dfg_serial(const CaseLog& log) {
  require_non_empty(log);
  Dfg dfg;
  for (const auto& t : log.traces) count_trace(t, dfg);
  return dfg;
}

Dfg discover_dfg(const CaseLog& log) {
  require_non_empty(log);
  Dfg dfg;
  const auto n = static_cast<std::int64_t>(log.traces.size());
#pragma omp parallel
  {
    Dfg local;
#pragma omp for schedule(static) nowait
    for (std::int64_t i = 0; i < n; ++i) count_trace(log.traces[static_cast<std::size_t>(i)], local);
#pragma omp critical(cdrpm_dfg_merge)
    merge_into(dfg, local);
  }
  return dfg;
}

namespace {

using Samples = std::map<ArcKey, std::vector<Timestamp>>;

void collect_samples(const Trace& t, Samples& out) {
  for (std::size_t i = 0; i + 1 < t.events.size(); ++i) {
    out[{t.events[i].activity, t.events[i + 1].activity}].push_back(t.events[i + 1].timestamp -
                                                                     t.events[i].timestamp);
  }
}

Dfg apply_samples(Dfg dfg, Samples& samples) {
  for (auto& [key, values] : samples) {
    const auto it = dfg.arcs.find(key);
    if (it == dfg.arcs.end()) {
      throw Error(Errc::mismatched_log, "log pair (" + key.first + ", " + key.second + ") is not in the model");
    }
    if (it->second.frequency != values.size()) {
      throw Error(Errc::mismatched_log, "arc (" + key.first + ", " + key.second + ") frequency differs from the log");
    }
  }
  for (auto& [key, arc] : dfg.arcs) {
    const auto it = samples.find(key);
    if (it == samples.end()) {
      if (arc.frequency > 0) {
        throw Error(Errc::mismatched_log, "arc (" + key.first + ", " + key.second + ") never occurs in the log");
      }
      arc.mean_s.reset();
      arc.median_s.reset();
      arc.n_samples = 0;
      continue;
    }
    auto& v = it->second;
    std::sort(v.begin(), v.end());
    const Timestamp sum = std::accumulate(v.begin(), v.end(), Timestamp{0});
    const std::size_t n = v.size();
    arc.n_samples = n;
    arc.mean_s = static_cast<double>(sum) / static_cast<double>(n);
    arc.median_s = n % 2 ? static_cast<double>(v[n / 2]) : (static_cast<double>(v[n / 2 - 1]) + v[n / 2]) / 2.0;
  }
  return dfg;
}

}  // namespace

Dfg annotate_durations_serial(Dfg dfg, const CaseLog& log) {
  Samples samples;
  for (const auto& t : log.traces) collect_samples(t, samples);
  return apply_samples(std::move(dfg), samples);
}

Dfg annotate_durations(Dfg dfg, const CaseLog& log) {
  Samples samples;
  const auto n = static_cast<std::int64_t>(log.traces.size());
#pragma omp parallel
  {
    Samples local;
#pragma omp for schedule(static) nowait
    for (std::int64_t i = 0; i < n; ++i) collect_samples(log.traces[static_cast<std::size_t>(i)], local);
#pragma omp critical(cdrpm_sample_merge)
    for (auto& [k, v] : local) {
      auto& dst = samples[k];
      dst.insert(dst.end(), v.begin(), v.end());
    }
  }
  return apply_samples(std::move(dfg), samples);
}

std::vector<Variant> extract_variants(const CaseLog& log, std::optional<std::size_t> top_k) {
  require_non_empty(log);
  struct Acc {
    std::size_t count = 0;
    Timestamp total = 0;
  };
  std::map<std::vector<std::string>, Acc> acc;
  for (const auto& t : log.traces) {
    auto& a = acc[t.activities()];
    ++a.count;
    a.total += t.duration();
  }
  std::vector<Variant> out;
  out.reserve(acc.size());
  for (auto& [seq, a] : acc) {
    out.push_back({seq, a.count, static_cast<double>(a.total) / static_cast<double>(a.count)});
  }
  std::stable_sort(out.begin(), out.end(), [](const Variant& a, const Variant& b) { return a.count > b.count; });
  if (top_k && *top_k < out.size()) out.resize(*top_k);
  return out;
}

FilterResult filter_log_by_variants(const CaseLog& log, std::span<const std::vector<std::string>> selection,
                                    const FilterOptions& options) {
  if (selection.empty()) throw Error(Errc::empty_selection, "variant selection is empty");
  const std::set<std::vector<std::string>> wanted(selection.begin(), selection.end());
  FilterResult out;
  for (const auto& t : log.traces) {
    if (wanted.count(t.activities())) out.log.traces.push_back(t);
  }
  out.empty = out.log.traces.empty();
  if (out.empty && !options.allow_empty_result) {
    throw Error(Errc::empty_selection, "no trace matches the selected variants");
  }
  return out;
}

bool natural_less(std::string_view a, std::string_view b) {
  std::size_t i = 0, j = 0;
  auto is_digit = [](char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; };
  while (i < a.size() && j < b.size()) {
    if (is_digit(a[i]) && is_digit(b[j])) {
      std::size_t ie = i, je = j;
      while (ie < a.size() && is_digit(a[ie])) ++ie;
      while (je < b.size() && is_digit(b[je])) ++je;
      auto na = a.substr(i, ie - i), nb = b.substr(j, je - j);
      while (na.size() > 1 && na.front() == '0') na.remove_prefix(1);
      while (nb.size() > 1 && nb.front() == '0') nb.remove_prefix(1);
      if (na.size() != nb.size()) return na.size() < nb.size();
      if (na != nb) return na < nb;
      i = ie;
      j = je;
    } else {
      if (a[i] != b[j]) return a[i] < b[j];
      ++i;
      ++j;
    }
  }
  if ((a.size() - i) != (b.size() - j)) return (a.size() - i) < (b.size() - j);
  return a < b;
}

CaseLog flatten_ocel(const Ocel& ocel, std::string_view object_type) {
  std::map<std::string, std::vector<const OcelEvent*>> by_object;
  for (const auto& o : ocel.objects) {
    if (o.type == object_type) by_object[o.id];
  }
  for (const auto& e : ocel.events) {
    for (const auto& r : e.relations) {
      const auto it = by_object.find(r.object_id);
      if (it != by_object.end() && (it->second.empty() || it->second.back() != &e)) it->second.push_back(&e);
    }
  }
  CaseLog log;
  for (auto& [id, events] : by_object) {
    if (events.empty()) continue;
    std::sort(events.begin(), events.end(), [](const OcelEvent* x, const OcelEvent* y) {
      if (x->timestamp != y->timestamp) return x->timestamp < y->timestamp;
      return natural_less(x->id, y->id);
    });
    Trace t{id, {}};
    for (const auto* e : events) t.events.push_back({e->activity, e->timestamp});
    log.traces.push_back(std::move(t));
  }
  return log;
}

OcDfg discover_ocdfg(const Ocel& ocel) {
  if (ocel.events.empty()) throw Error(Errc::empty_log, "cannot discover a model from an empty OCEL");
  OcDfg model;
  for (const auto& type : ocel.object_types) {
    const CaseLog flat = flatten_ocel(ocel, type);
    if (flat.traces.empty()) continue;
    Dfg dfg = annotate_durations(discover_dfg(flat), flat);
    for (const auto& [a, c] : dfg.nodes) model.nodes.insert(a);
    model.per_type.emplace(type, std::move(dfg));
  }
  return model;
}

namespace {

std::string dot_quote(std::string_view s) {
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  out += '"';
  return out;
}

std::string minutes(double seconds) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", seconds / 60.0);
  return buf;
}

std::string arc_label(const ArcStats& arc, const DotOptions& options) {
  std::string label;
  if (options.show_frequency) label = std::to_string(arc.frequency);
  if (options.show_duration && arc.mean_s) {
    if (!label.empty()) label += "\\n";
    label += "μ=" + minutes(*arc.mean_s) + "m";
  }
  return label;
}

constexpr std::string_view kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                         "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

}  // namespace

std::string export_dot(const Dfg& dfg, const DotOptions& options) {
  std::ostringstream out;
  out << "digraph DFG {\n  rankdir=LR;\n  node [shape=box, style=rounded];\n";
  for (const auto& [name, count] : dfg.nodes) {
    out << "  " << dot_quote(name) << " [label=" << dot_quote(options.show_frequency ? name + " (" + std::to_string(count) + ")" : name)
        << "];\n";
  }
  for (const auto& [key, arc] : dfg.arcs) {
    if (arc.frequency < options.min_arc_frequency || arc.frequency == 0) continue;
    out << "  " << dot_quote(key.first) << " -> " << dot_quote(key.second) << " [label=\"" << arc_label(arc, options)
        << "\"];\n";
  }
  out << "}\n";
  return out.str();
}

std::string export_dot(const OcDfg& model, const DotOptions& options) {
  std::ostringstream out;
  out << "digraph OCDFG {\n  rankdir=LR;\n  node [shape=box, style=rounded];\n";
  for (const auto& name : model.nodes) out << "  " << dot_quote(name) << ";\n";

  std::map<std::string, std::size_t> color_of;
  for (const auto& [type, dfg] : model.per_type) color_of.emplace(type, color_of.size());

  struct Edge {
    const std::string* src;
    const std::string* dst;
    const std::string* type;
    const ArcStats* arc;
  };
  std::vector<Edge> edges;
  for (const auto& [type, dfg] : model.per_type) {
    if (options.exclude_types.count(type)) continue;
    for (const auto& [key, arc] : dfg.arcs) {
      if (arc.frequency < options.min_arc_frequency || arc.frequency == 0) continue;
      edges.push_back({&key.first, &key.second, &type, &arc});
    }
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    return std::tie(*a.src, *a.dst, *a.type) < std::tie(*b.src, *b.dst, *b.type);
  });
  for (const auto& e : edges) {
    const auto color = kPalette[color_of.at(*e.type) % std::size(kPalette)];
    out << "  " << dot_quote(*e.src) << " -> " << dot_quote(*e.dst) << " [label=\"" << *e.type << ": "
        << arc_label(*e.arc, options) << "\", color=\"" << color << "\", fontcolor=\"" << color << "\"];\n";
  }
  out << "}\n";
  return out.str();
}

namespace {

using ojson = nlohmann::ordered_json;

ojson arc_json(const ArcKey& key, const ArcStats& arc, const std::string* type) {
  ojson a;
  a["src"] = key.first;
  a["dst"] = key.second;
  a["freq"] = arc.frequency;
  a["mean_s"] = arc.mean_s ? ojson(*arc.mean_s) : ojson(nullptr);
  a["median_s"] = arc.median_s ? ojson(*arc.median_s) : ojson(nullptr);
  if (type) a["objectType"] = *type;
  return a;
}

ojson node_json(const Dfg& dfg, const std::string& name, std::size_t count, const std::string* type) {
  ojson n;
  n["name"] = name;
  n["freq"] = count;
  const auto s = dfg.start_counts.find(name);
  const auto e = dfg.end_counts.find(name);
  n["start"] = s == dfg.start_counts.end() ? 0 : s->second;
  n["end"] = e == dfg.end_counts.end() ? 0 : e->second;
  if (type) n["objectType"] = *type;
  return n;
}

}  // namespace

std::string export_json(const Dfg& dfg) {
  ojson doc;
  doc["nodes"] = ojson::array();
  for (const auto& [name, count] : dfg.nodes) doc["nodes"].push_back(node_json(dfg, name, count, nullptr));
  doc["arcs"] = ojson::array();
  for (const auto& [key, arc] : dfg.arcs) doc["arcs"].push_back(arc_json(key, arc, nullptr));
  return doc.dump(1) + "\n";
}

std::string export_json(const OcDfg& model) {
  struct NodeRow {
    const std::string* name;
    const std::string* type;
    const Dfg* dfg;
    std::size_t count;
  };
  std::vector<NodeRow> nodes;
  std::vector<std::tuple<const ArcKey*, const std::string*, const ArcStats*>> arcs;
  for (const auto& [type, dfg] : model.per_type) {
    for (const auto& [name, count] : dfg.nodes) nodes.push_back({&name, &type, &dfg, count});
    for (const auto& [key, arc] : dfg.arcs) arcs.emplace_back(&key, &type, &arc);
  }
  std::sort(nodes.begin(), nodes.end(),
            [](const NodeRow& a, const NodeRow& b) { return std::tie(*a.name, *a.type) < std::tie(*b.name, *b.type); });
  std::sort(arcs.begin(), arcs.end(), [](const auto& a, const auto& b) {
    return std::tie(*std::get<0>(a), *std::get<1>(a)) < std::tie(*std::get<0>(b), *std::get<1>(b));
  });
  ojson doc;
  doc["nodes"] = ojson::array();
  for (const auto& n : nodes) doc["nodes"].push_back(node_json(*n.dfg, *n.name, n.count, n.type));
  doc["arcs"] = ojson::array();
  for (const auto& [key, type, arc] : arcs) doc["arcs"].push_back(arc_json(*key, *arc, type));
  return doc.dump(1) + "\n";
}

Dfg parse_dfg_json(std::string_view text, const std::string& source) {
  Dfg dfg;
  try {
    const auto doc = nlohmann::json::parse(text);
    for (const auto& n : doc.at("nodes")) {
      if (n.contains("objectType")) throw Error(Errc::invalid_input, source + ": object-centric model, expected a DFG");
      const auto name = n.at("name").get<std::string>();
      dfg.nodes[name] = n.at("freq").get<std::size_t>();
      if (const auto s = n.value("start", std::size_t{0})) dfg.start_counts[name] = s;
      if (const auto e = n.value("end", std::size_t{0})) dfg.end_counts[name] = e;
    }
    for (const auto& a : doc.at("arcs")) {
      ArcStats arc;
      arc.frequency = a.at("freq").get<std::size_t>();
      if (!a.at("mean_s").is_null()) arc.mean_s = a.at("mean_s").get<double>();
      if (!a.at("median_s").is_null()) arc.median_s = a.at("median_s").get<double>();
      arc.n_samples = arc.mean_s ? arc.frequency : 0;
      dfg.arcs[{a.at("src").get<std::string>(), a.at("dst").get<std::string>()}] = arc;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_input, source + ": " + e.what());
  }
  return dfg;
}

Dfg read_dfg_json(const std::filesystem::path& path) { return parse_dfg_json(read_file(path), path.string()); }

std::string write_variants(std::span<const Variant> variants) {
  std::ostringstream out;
  csv::write_row(out, {"rank", "count", "mean_duration_s", "variant"});
  for (std::size_t i = 0; i < variants.size(); ++i) {
    std::string seq;
    for (const auto& a : variants[i].activities) seq += (seq.empty() ? "" : " -> ") + a;
    csv::write_row(out, {std::to_string(i + 1), std::to_string(variants[i].count),
                         format_double(variants[i].mean_duration_s), seq});
  }
  return out.str();
}

}  // namespace cdrpm
