#pragma once

// Workflow nets from directly-follows graphs and token-based replay fitness.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cdrpm/discovery.hpp"
#include "cdrpm/event_log.hpp"

namespace cdrpm {

/// Place/transition net. Arcs are stored per node as index lists.
struct PetriNet {
  struct Place {
    std::string id;
    std::vector<std::size_t> inputs;   // transitions producing into it
    std::vector<std::size_t> outputs;  // transitions consuming from it
  };
  struct Transition {
    std::string label;
    std::vector<std::size_t> inputs;   // places
    std::vector<std::size_t> outputs;  // places
  };

  std::vector<Place> places;
  std::vector<Transition> transitions;
  std::size_t source = 0;  // initial marking: one token here
  std::size_t sink = 0;    // final marking: one token here

  std::optional<std::size_t> transition_of(std::string_view label) const;
  std::optional<std::size_t> place_of(std::string_view id) const;
  std::size_t arc_count() const;
  /// Single source / sink, unique labels, consistent adjacency.
  void validate() const;
};

/// One transition per activity, one place per distinct arc ("p|a|b"), a
/// source place feeding every start activity and a sink fed by every end
/// activity. Throws Errc::empty_model.
PetriNet dfg_to_workflow_net(const Dfg& dfg);

struct TraceFitness {
  std::string case_id;
  std::size_t produced = 0;
  std::size_t consumed = 0;
  std::size_t missing = 0;
  std::size_t remaining = 0;
  double fitness = 1.0;
  friend bool operator==(const TraceFitness&, const TraceFitness&) = default;
};

struct FitnessReport {
  std::size_t produced = 0;
  std::size_t consumed = 0;
  std::size_t missing = 0;
  std::size_t remaining = 0;
  double fitness = 1.0;
  std::size_t n_traces = 0;
  bool vacuous = false;  // empty log: fitness 1.0 by convention
  std::vector<TraceFitness> traces;
  friend bool operator==(const FitnessReport&, const FitnessReport&) = default;
};

/// fitness = (1 - m/c)/2 + (1 - r/p)/2, and 1 when c or p is zero.
double token_fitness(std::size_t produced, std::size_t consumed, std::size_t missing, std::size_t remaining);

/// Replays one trace. Every transition of a DFG-derived net has one input
/// place per incoming arc, and exactly one of them carries the token of the
/// path actually taken, so a firing consumes one token: from the place of the
/// arc just traversed if it is marked, else from any marked input place, else
/// a missing token is created there. Likewise it produces one token, into the
/// place leading to the next activity (or the sink after the last event),
/// falling back to its first output place. An activity without a transition
/// counts as one consumed and missing token and is skipped.
TraceFitness replay_trace(const PetriNet& net, const Trace& trace);

FitnessReport token_replay(const PetriNet& net, const CaseLog& log);  // OpenMP over traces
FitnessReport token_replay_serial(const PetriNet& net, const CaseLog& log);

std::string write_fitness_json(const FitnessReport& report);
std::string write_fitness_traces(const FitnessReport& report);
std::string export_net_dot(const PetriNet& net);

}  // namespace cdrpm
