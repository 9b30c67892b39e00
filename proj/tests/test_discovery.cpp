#include <algorithm>
#include <numeric>

#include "cdrpm/discovery.hpp"
#include "cdrpm/error.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace cdrpm;
using namespace testsupport;

namespace {

CaseLog make_log(const std::vector<std::vector<std::pair<std::string, Timestamp>>>& traces) {
  CaseLog log;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    Trace t;
    t.case_id = "c" + std::to_string(i + 1);
    for (const auto& [a, ts] : traces[i]) t.events.push_back({a, ts});
    log.traces.push_back(std::move(t));
  }
  return log;
}

Errc code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::io_error;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

}  // namespace

TEST_SUITE("discovery") {
  TEST_CASE("two identical traces") {
    const CaseLog log = make_log({{{"A", 0}, {"B", 60}}, {{"A", 0}, {"B", 60}}});
    const Dfg d = discover_dfg(log);
    CHECK(d.nodes == std::map<std::string, std::size_t>{{"A", 2}, {"B", 2}});
    REQUIRE(d.arcs.size() == 1);
    CHECK(d.arcs.at({"A", "B"}).frequency == 2);
    CHECK(d.start_counts.at("A") == 2);
    CHECK(d.end_counts.at("B") == 2);
    CHECK(d.trace_count() == 2);
  }

  TEST_CASE("three-way example") {
    const CaseLog log = make_log({{{"A", 0}, {"B", 1}, {"C", 2}}, {{"A", 0}, {"C", 1}}});
    const Dfg d = discover_dfg(log);
    CHECK(d.arcs.size() == 3);
    CHECK(d.arcs.at({"A", "B"}).frequency == 1);
    CHECK(d.arcs.at({"B", "C"}).frequency == 1);
    CHECK(d.arcs.at({"A", "C"}).frequency == 1);
    CHECK(d.end_counts.at("C") == 2);
  }

  TEST_CASE("repeated activity is a self-loop") {
    const Dfg d = discover_dfg(make_log({{{"A", 0}, {"A", 5}}}));
    CHECK(d.arcs.at({"A", "A"}).frequency == 1);
    CHECK(d.nodes.at("A") == 2);
  }

  TEST_CASE("empty log is rejected") {
    CHECK(code_of([] { discover_dfg(CaseLog{}); }) == Errc::empty_log);
    CHECK(code_of([] { extract_variants(CaseLog{}); }) == Errc::empty_log);
  }

  TEST_CASE("arc durations: mean and median") {
    const CaseLog log = make_log({{{"A", 0}, {"B", 60}}, {{"A", 0}, {"B", 120}}, {{"A", 10}, {"B", 400}}});
    const Dfg d = annotate_durations(discover_dfg(log), log);
    const ArcStats& ab = d.arcs.at({"A", "B"});
    CHECK(*ab.mean_s == doctest::Approx((60.0 + 120 + 390) / 3));
    CHECK(*ab.median_s == doctest::Approx(120));
    CHECK(ab.n_samples == 3);
  }

  TEST_CASE("durations against a model missing an arc are rejected") {
    const Dfg model = discover_dfg(make_log({{{"A", 0}, {"B", 1}}}));
    CHECK(code_of([&] { annotate_durations(model, make_log({{{"A", 0}, {"C", 1}}})); }) == Errc::mismatched_log);
  }

  TEST_CASE("random logs: counts and durations match direct counting; serial equals parallel") {
    Rng rng(11);
    for (int k = 0; k < 25; ++k) {
      const CaseLog log = random_log(rng, 1 + rng.index(300), 2 + rng.index(6), 8);
      const Dfg d = annotate_durations(discover_dfg(log), log);
      const PlainDfg plain = plain_dfg(sequences(log));
      CHECK(same_counts(d, plain));
      for (const auto& [key, gaps] : plain.gaps) {
        const ArcStats& a = d.arcs.at(key);
        CHECK(*a.mean_s == doctest::Approx(std::accumulate(gaps.begin(), gaps.end(), 0.0) / gaps.size()));
        CHECK(*a.median_s == doctest::Approx(median_of(gaps)));
      }
      CHECK(discover_dfg_serial(log) == discover_dfg(log));
      CHECK(annotate_durations_serial(discover_dfg_serial(log), log) == d);
      // Arc frequencies sum to the number of adjacent pairs.
      std::size_t pairs = 0, arcs = 0;
      for (const auto& t : log.traces) pairs += t.events.size() - 1;
      for (const auto& [key, a] : d.arcs) arcs += a.frequency;
      CHECK(arcs == pairs);
    }
  }

  TEST_CASE("discovery is deterministic") {
    Rng rng(5);
    const CaseLog log = random_log(rng, 500, 6, 6);
    const Dfg d = annotate_durations(discover_dfg(log), log);
    CHECK(export_json(d) == export_json(annotate_durations(discover_dfg(log), log)));
    CHECK(export_dot(d) == export_dot(annotate_durations(discover_dfg(log), log)));
  }

  TEST_CASE("variants are ranked by count and cut at top_k") {
    const CaseLog log = make_log({{{"A", 0}, {"B", 10}},
                                  {{"A", 0}, {"B", 30}},
                                  {{"A", 0}, {"C", 5}},
                                  {{"A", 0}, {"B", 20}},
                                  {{"B", 0}, {"C", 1}},
                                  {{"A", 0}, {"C", 7}}});
    const auto all = extract_variants(log);
    REQUIRE(all.size() == 3);
    CHECK(all[0].activities == std::vector<std::string>{"A", "B"});
    CHECK(all[0].count == 3);
    CHECK(all[0].mean_duration_s == doctest::Approx(20));
    CHECK(all[1].activities == std::vector<std::string>{"A", "C"});
    CHECK(all[1].count == 2);
    CHECK(all[2].count == 1);
    std::size_t total = 0;
    for (const auto& v : all) total += v.count;
    CHECK(total == log.traces.size());
    const auto top = extract_variants(log, 2);
    CHECK(top.size() == 2);
    CHECK(extract_variants(log, 10).size() == 3);
  }

  TEST_CASE("variant filtering keeps only selected traces") {
    const CaseLog log = make_log({{{"A", 0}, {"B", 1}}, {{"A", 0}, {"C", 1}}, {{"A", 0}, {"B", 2}}});
    const std::vector<std::vector<std::string>> sel{{"A", "B"}};
    const auto r = filter_log_by_variants(log, sel);
    CHECK_FALSE(r.empty);
    REQUIRE(r.log.traces.size() == 2);
    CHECK(r.log.traces[0].case_id == "c1");
    CHECK(r.log.traces[1].case_id == "c3");

    const std::vector<std::vector<std::string>> none{{"Z"}};
    CHECK(code_of([&] { filter_log_by_variants(log, none); }) == Errc::empty_selection);
    const auto allowed = filter_log_by_variants(log, none, {.allow_empty_result = true});
    CHECK(allowed.empty);
    CHECK(allowed.log.traces.empty());
  }

  TEST_CASE("natural ordering of ids") {
    CHECK(natural_less("e2_1", "e10_0"));
    CHECK_FALSE(natural_less("e10_0", "e2_1"));
    CHECK(natural_less("a", "b"));
    CHECK_FALSE(natural_less("x1", "x1"));
  }

  TEST_CASE("object-centric DFG equals brute-force flattening on random logs") {
    Rng rng(21);
    for (int k = 0; k < 20; ++k) {
      const Ocel o = random_ocel(rng, 50 + rng.index(400), 3 + rng.index(40), 1 + rng.index(4), 2 + rng.index(5));
      const OcDfg m = discover_ocdfg(o);
      std::set<std::string> acts;
      for (const auto& e : o.events) acts.insert(e.activity);
      CHECK(m.nodes == acts);
      for (const auto& type : o.object_types) {
        const auto seqs = brute_flatten(o, type);
        if (seqs.empty()) {
          CHECK(m.per_type.count(type) == 0);
          continue;
        }
        REQUIRE(m.per_type.count(type) == 1);
        const Dfg& d = m.per_type.at(type);
        const PlainDfg plain = plain_dfg(seqs);
        CHECK(same_counts(d, plain));
        for (const auto& [key, gaps] : plain.gaps) {
          CHECK(*d.arcs.at(key).mean_s == doctest::Approx(std::accumulate(gaps.begin(), gaps.end(), 0.0) / gaps.size()));
        }
      }
    }
  }

  TEST_CASE("flattening orders ties by natural event id") {
    Ocel o;
    o.object_types = {"T"};
    o.objects = {{"x", "T"}};
    o.events = {{"e10", "B", 5, {{"x", "r"}}}, {"e2", "A", 5, {{"x", "r"}}}};
    const CaseLog flat = flatten_ocel(o, "T");
    REQUIRE(flat.traces.size() == 1);
    CHECK(flat.traces[0].activities() == std::vector<std::string>{"A", "B"});
  }

  TEST_CASE("DOT export") {
    const Dfg d = discover_dfg(make_log({{{"A", 0}, {"B", 1}}, {{"A", 0}, {"B", 1}}, {{"A", 0}, {"C", 1}}}));
    const std::string dot = export_dot(d);
    CHECK(dot.rfind("digraph", 0) == 0);
    CHECK(dot.find("  \"A\" -> \"B\" [label=\"2\"];") != std::string::npos);
    CHECK(dot.find("\"A\" -> \"C\"") != std::string::npos);
    const std::string cut = export_dot(d, {.min_arc_frequency = 2});
    CHECK(cut.find("\"A\" -> \"C\"") == std::string::npos);
    CHECK(cut.find("\"A\" -> \"B\"") != std::string::npos);
  }

  TEST_CASE("OC-DFG DOT honours type exclusion and arc threshold") {
    Ocel o;
    o.object_types = {"Bus", "Mode"};
    o.objects = {{"t1", "Bus"}, {"t2", "Bus"}, {"Bus", "Mode"}};
    o.events = {{"e1", "A", 0, {{"t1", "trip"}, {"Bus", "mode"}}},
                {"e2", "B", 1, {{"t1", "trip"}, {"Bus", "mode"}}},
                {"e3", "A", 2, {{"t2", "trip"}, {"Bus", "mode"}}},
                {"e4", "C", 3, {{"t2", "trip"}, {"Bus", "mode"}}}};
    const OcDfg m = discover_ocdfg(o);
    CHECK(m.per_type.at("Mode").arcs.count({"B", "A"}) == 1);
    const std::string all = export_dot(m);
    CHECK(all.find("Mode:") != std::string::npos);
    DotOptions opt;
    opt.exclude_types = {"Mode"};
    const std::string trips = export_dot(m, opt);
    CHECK(trips.find("Mode:") == std::string::npos);
    CHECK(trips.find("\"A\" -> \"B\" [label=\"Bus: 1\"") != std::string::npos);
    opt.min_arc_frequency = 2;
    CHECK(export_dot(m, opt).find("->") == std::string::npos);
  }

  TEST_CASE("JSON round-trip of a DFG") {
    Rng rng(3);
    const CaseLog log = random_log(rng, 100, 5, 5);
    const Dfg d = annotate_durations(discover_dfg(log), log);
    const std::string json = export_json(d);
    const Dfg back = parse_dfg_json(json, "mem");
    CHECK(export_json(back) == json);
    CHECK(back.arcs.size() == d.arcs.size());
    CHECK_THROWS_AS(parse_dfg_json("{}", "mem"), Error);
  }

  TEST_CASE("variants CSV") {
    const auto v = extract_variants(make_log({{{"A", 0}, {"B", 60}}}));
    CHECK(write_variants(v) == "rank,count,mean_duration_s,variant\n1,1,60,A -> B\n");
  }
}
