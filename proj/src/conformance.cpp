#include "cdrpm/conformance.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_map>

#include "cdrpm/error.hpp"
#include "json.hpp"

namespace cdrpm {

std::optional<std::size_t> PetriNet::transition_of(std::string_view label) const {
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    if (transitions[i].label == label) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> PetriNet::place_of(std::string_view id) const {
  for (std::size_t i = 0; i < places.size(); ++i) {
    if (places[i].id == id) return i;
  }
  return std::nullopt;
}

std::size_t PetriNet::arc_count() const {
  std::size_t n = 0;
  for (const auto& t : transitions) n += t.inputs.size() + t.outputs.size();
  return n;
}

void PetriNet::validate() const {
  std::size_t sources = 0, sinks = 0;
  for (std::size_t p = 0; p < places.size(); ++p) {
    if (places[p].inputs.empty()) {
      ++sources;
      if (p != source) throw Error(Errc::invalid_input, "place " + places[p].id + " has no input but is not the source");
    }
    if (places[p].outputs.empty()) {
      ++sinks;
      if (p != sink) throw Error(Errc::invalid_input, "place " + places[p].id + " has no output but is not the sink");
    }
  }
  if (sources != 1 || sinks != 1) throw Error(Errc::invalid_input, "workflow net needs one source and one sink");
  std::set<std::string_view> labels;
  for (std::size_t t = 0; t < transitions.size(); ++t) {
    if (!labels.insert(transitions[t].label).second) {
      throw Error(Errc::invalid_input, "duplicate transition label " + transitions[t].label);
    }
    for (const auto p : transitions[t].inputs) {
      const auto& outs = places.at(p).outputs;
      if (std::find(outs.begin(), outs.end(), t) == outs.end()) throw Error(Errc::invalid_input, "inconsistent arc");
    }
    for (const auto p : transitions[t].outputs) {
      const auto& ins = places.at(p).inputs;
      if (std::find(ins.begin(), ins.end(), t) == ins.end()) throw Error(Errc::invalid_input, "inconsistent arc");
    }
  }
}

PetriNet dfg_to_workflow_net(const Dfg& dfg) {
  if (dfg.nodes.empty() || dfg.start_counts.empty() || dfg.end_counts.empty()) {
    throw Error(Errc::empty_model, "cannot build a workflow net from an empty DFG");
  }
  PetriNet net;
  std::unordered_map<std::string, std::size_t> tid;
  for (const auto& [name, count] : dfg.nodes) {
    tid.emplace(name, net.transitions.size());
    net.transitions.push_back({name, {}, {}});
  }
  auto link = [&](std::size_t from_t, std::size_t place, std::size_t to_t) {
    if (from_t != SIZE_MAX) {
      net.transitions[from_t].outputs.push_back(place);
      net.places[place].inputs.push_back(from_t);
    }
    if (to_t != SIZE_MAX) {
      net.transitions[to_t].inputs.push_back(place);
      net.places[place].outputs.push_back(to_t);
    }
  };
  net.source = net.places.size();
  net.places.push_back({"source", {}, {}});
  for (const auto& [name, count] : dfg.start_counts) {
    if (count) link(SIZE_MAX, net.source, tid.at(name));
  }
  for (const auto& [key, arc] : dfg.arcs) {
    if (arc.frequency == 0) continue;
    const auto place = net.places.size();
    net.places.push_back({"p|" + key.first + "|" + key.second, {}, {}});
    link(tid.at(key.first), place, tid.at(key.second));
  }
  net.sink = net.places.size();
  net.places.push_back({"sink", {}, {}});
  for (const auto& [name, count] : dfg.end_counts) {
    if (count) link(tid.at(name), net.sink, SIZE_MAX);
  }
  return net;
}

double token_fitness(std::size_t produced, std::size_t consumed, std::size_t missing, std::size_t remaining) {
  if (produced == 0 || consumed == 0) return 1.0;
  return 0.5 * (1.0 - static_cast<double>(missing) / static_cast<double>(consumed)) +
         0.5 * (1.0 - static_cast<double>(remaining) / static_cast<double>(produced));
}

namespace {

class Replayer {
 public:
  explicit Replayer(const PetriNet& net) : net_(net), marking_(net.places.size(), 0) {
    for (std::size_t t = 0; t < net.transitions.size(); ++t) label_.emplace(net.transitions[t].label, t);
  }

  TraceFitness run(const Trace& trace) {
    TraceFitness r{trace.case_id};
    std::fill(marking_.begin(), marking_.end(), 0);

    std::vector<std::optional<std::size_t>> fired(trace.events.size());
    for (std::size_t i = 0; i < trace.events.size(); ++i) {
      const auto it = label_.find(trace.events[i].activity);
      if (it != label_.end()) fired[i] = it->second;
    }

    marking_[net_.source] = 1;
    r.produced = 1;
    std::optional<std::size_t> prev;
    for (std::size_t i = 0; i < trace.events.size(); ++i) {
      if (!fired[i]) {
        ++r.consumed;
        ++r.missing;
        continue;
      }
      const std::size_t t = *fired[i];
      const auto& tr = net_.transitions[t];

      const auto expected = prev ? place_between(*prev, t) : input_source(t);
      std::optional<std::size_t> take;
      if (expected && marking_[*expected] > 0) {
        take = expected;
      } else {
        for (const auto p : tr.inputs) {
          if (marking_[p] > 0) {
            take = p;
            break;
          }
        }
      }
      if (!take && !tr.inputs.empty()) {
        take = expected ? *expected : tr.inputs.front();
        ++marking_[*take];
        ++r.missing;
      }
      if (take) {
        --marking_[*take];
        ++r.consumed;
      }

      std::optional<std::size_t> next;
      for (std::size_t j = i + 1; j < trace.events.size() && !next; ++j) next = fired[j];
      std::optional<std::size_t> put = next ? place_between(t, *next) : output_sink(t);
      if (!put && !tr.outputs.empty()) put = tr.outputs.front();
      if (put) {
        ++marking_[*put];
        ++r.produced;
      }
      prev = t;
    }

    ++r.consumed;
    if (marking_[net_.sink] > 0) {
      --marking_[net_.sink];
    } else {
      ++r.missing;
    }
    for (const auto m : marking_) r.remaining += static_cast<std::size_t>(m);
    r.fitness = token_fitness(r.produced, r.consumed, r.missing, r.remaining);
    return r;
  }

 private:
  std::optional<std::size_t> place_between(std::size_t from, std::size_t to) const {
    for (const auto p : net_.transitions[from].outputs) {
      const auto& outs = net_.places[p].outputs;
      if (std::find(outs.begin(), outs.end(), to) != outs.end()) return p;
    }
    return std::nullopt;
  }
  std::optional<std::size_t> input_source(std::size_t t) const {
    const auto& ins = net_.transitions[t].inputs;
    if (std::find(ins.begin(), ins.end(), net_.source) != ins.end()) return net_.source;
    return std::nullopt;
  }
  std::optional<std::size_t> output_sink(std::size_t t) const {
    const auto& outs = net_.transitions[t].outputs;
    if (std::find(outs.begin(), outs.end(), net_.sink) != outs.end()) return net_.sink;
    return std::nullopt;
  }

  const PetriNet& net_;
  std::unordered_map<std::string, std::size_t> label_;
  std::vector<int> marking_;
};

FitnessReport summarize(std::vector<TraceFitness> traces) {
  FitnessReport rep;
  rep.n_traces = traces.size();
  for (const auto& t : traces) {
    rep.produced += t.produced;
    rep.consumed += t.consumed;
    rep.missing += t.missing;
    rep.remaining += t.remaining;
  }
  rep.vacuous = traces.empty();
  rep.fitness = token_fitness(rep.produced, rep.consumed, rep.missing, rep.remaining);
  rep.traces = std::move(traces);
  return rep;
}

}  // namespace

TraceFitness replay_trace(const PetriNet& net, const Trace& trace) { return Replayer(net).run(trace); }

FitnessReport token_replay_serial(const PetriNet& net, const CaseLog& log) {
  Replayer replayer(net);
  std::vector<TraceFitness> traces;
  traces.reserve(log.traces.size());
  for (const auto& t : log.traces) traces.push_back(replayer.run(t));
  return summarize(std::move(traces));
}

FitnessReport token_replay(const PetriNet& net, const CaseLog& log) {
  std::vector<TraceFitness> traces(log.traces.size());
  const auto n = static_cast<std::int64_t>(log.traces.size());
#pragma omp parallel
  {
    Replayer replayer(net);
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
      traces[static_cast<std::size_t>(i)] = replayer.run(log.traces[static_cast<std::size_t>(i)]);
    }
  }
  return summarize(std::move(traces));
}

std::string write_fitness_json(const FitnessReport& report) {
  nlohmann::ordered_json doc;
  doc["fitness"] = report.fitness;
  doc["produced"] = report.produced;
  doc["consumed"] = report.consumed;
  doc["missing"] = report.missing;
  doc["remaining"] = report.remaining;
  doc["n_traces"] = report.n_traces;
  doc["vacuous"] = report.vacuous;
  return doc.dump(2) + "\n";
}

std::string write_fitness_traces(const FitnessReport& report) {
  std::ostringstream out;
  csv::write_row(out, {"case_id", "produced", "consumed", "missing", "remaining", "fitness"});
  for (const auto& t : report.traces) {
    csv::write_row(out, {t.case_id, std::to_string(t.produced), std::to_string(t.consumed), std::to_string(t.missing),
                         std::to_string(t.remaining), format_double(t.fitness)});
  }
  return out.str();
}

std::string export_net_dot(const PetriNet& net) {
  auto q = [](std::string_view s) {
    std::string out = "\"";
    for (const char c : s) {
      if (c == '"' || c == '\\') out += '\\';
      out += c;
    }
    return out + "\"";
  };
  std::ostringstream out;
  out << "digraph WorkflowNet {\n  rankdir=LR;\n";
  for (std::size_t p = 0; p < net.places.size(); ++p) {
    out << "  " << q("P:" + net.places[p].id) << " [shape=circle, label=" << q(p == net.source ? "●" : "") << "];\n";
  }
  for (const auto& t : net.transitions) out << "  " << q("T:" + t.label) << " [shape=box, label=" << q(t.label) << "];\n";
  for (const auto& t : net.transitions) {
    for (const auto p : t.inputs) out << "  " << q("P:" + net.places[p].id) << " -> " << q("T:" + t.label) << ";\n";
    for (const auto p : t.outputs) out << "  " << q("T:" + t.label) << " -> " << q("P:" + net.places[p].id) << ";\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace cdrpm
