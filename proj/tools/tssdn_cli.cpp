// tssdn: simulation, bound and security-analysis front end.
//
// Exit codes: 0 success, 1 usage, 2 input validation, 3 runtime invariant.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tssdn/attacksim.hpp"
#include "tssdn/bounds.hpp"
#include "tssdn/error.hpp"
#include "tssdn/scenario.hpp"
#include "tssdn/secsep.hpp"

namespace fs = std::filesystem;
using namespace tssdn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInput = 2;
constexpr int kExitInvariant = 3;

bool verbose() {
  const char* v = std::getenv("TSSDN_VERBOSE");
  return v && *v && std::string(v) != "0";
}

void note(const std::string& msg) {
  if (verbose()) std::cerr << "tssdn: " << msg << '\n';
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw Error(Errc::Usage, "cannot write " + p.string());
  return out;
}

// ---- simulate -----------------------------------------------------------------------------

struct SimulateArgs {
  std::string scenario;
  std::uint64_t seed = 0;
  int seeds = 0;
  std::string variant = "tssdn";
  std::string update = "sync";
  std::string out = "out";
  bool no_gates = false;
  double sr_at_us = -1;
};

struct SeedOutput {
  std::string latency, bounds, trace, txn;
  std::vector<std::string> problems;
};

SeedOutput simulate_one(const scen::Scenario& s, scen::RunOptions o, bool want_trace) {
  o.trace = want_trace;
  const auto r = scen::run(s, o);
  SeedOutput out;
  std::ostringstream lat, bnd, tr, tx;
  scen::write_latency_csv(lat, r.latencies);
  const auto rows = scen::bound_report(s, r);
  scen::write_bound_csv(bnd, rows);
  if (want_trace) r.trace.write_csv(tr);
  r.txn_log.write_csv(tx);
  out.latency = lat.str();
  out.bounds = bnd.str();
  out.trace = tr.str();
  out.txn = tx.str();

  if (!r.all_committed) out.problems.push_back("a reconfiguration transaction did not commit");
  const auto& c = r.counters;
  if (c.originated + c.replicated != c.delivered + c.dropped + c.to_controller + r.in_flight)
    out.problems.push_back("frame conservation violated");
  return out;
}

// Prefix every data row with the seed; the header gains a leading seed column.
void append_seeded(std::ostream& out, const std::string& csv, std::uint64_t seed, bool header) {
  std::istringstream in(csv);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) {
      first = false;
      if (header) out << "seed," << line << '\n';
      continue;
    }
    out << seed << ',' << line << '\n';
  }
}

int cmd_simulate(const SimulateArgs& a) {
  const auto s = scen::Scenario::load(a.scenario);
  scen::RunOptions o;
  if (a.variant == "tssdn") o.variant = scen::Variant::Tssdn;
  else if (a.variant == "tsn") o.variant = scen::Variant::Tsn;
  else throw Error(Errc::Usage, "--variant must be tsn or tssdn");
  if (a.update == "sync") o.update = scen::UpdateMode::Sync;
  else if (a.update == "ordered") o.update = scen::UpdateMode::Ordered;
  else if (a.update == "split") o.update = scen::UpdateMode::Split;
  else throw Error(Errc::Usage, "--update must be sync, ordered or split");
  o.gates = !a.no_gates;
  if (a.sr_at_us >= 0) o.sr_at = static_cast<SimTime>(a.sr_at_us * kNsPerUs);

  // Every configuration must pass schedule validation before anything runs.
  std::vector<std::string> problems;
  for (const auto& c : s.configs) {
    const auto p = s.placement_of(c);
    const auto v = bounds::validate_schedule(p.gcls, p.plan);
    if (!v.ok()) problems.push_back(c.name + ": " + v.str());
  }

  fs::create_directories(a.out);
  const fs::path dir(a.out);
  if (a.seeds <= 0) {
    o.seed = a.seed;
    note("simulating seed " + std::to_string(a.seed));
    const auto r = simulate_one(s, o, true);
    open_out(dir / "latency.csv") << r.latency;
    open_out(dir / "bounds.csv") << r.bounds;
    open_out(dir / "trace.csv") << r.trace;
    open_out(dir / "txn_log.csv") << r.txn;
    problems.insert(problems.end(), r.problems.begin(), r.problems.end());
  } else {
    // Independent kernels per seed; merged in seed order.
    std::vector<std::future<SeedOutput>> jobs;
    for (int i = 0; i < a.seeds; ++i) {
      auto oi = o;
      oi.seed = a.seed + static_cast<std::uint64_t>(i);
      jobs.push_back(std::async(std::launch::async, [&s, oi] { return simulate_one(s, oi, false); }));
    }
    auto lat = open_out(dir / "latency.csv");
    auto bnd = open_out(dir / "bounds.csv");
    for (int i = 0; i < a.seeds; ++i) {
      const auto r = jobs[static_cast<std::size_t>(i)].get();
      const auto seed = a.seed + static_cast<std::uint64_t>(i);
      append_seeded(lat, r.latency, seed, i == 0);
      append_seeded(bnd, r.bounds, seed, i == 0);
      for (const auto& p : r.problems) problems.push_back("seed " + std::to_string(seed) + ": " + p);
    }
  }
  for (const auto& p : problems) std::cerr << "tssdn: invariant: " << p << '\n';
  return problems.empty() ? kExitOk : kExitInvariant;
}

// ---- bounds -------------------------------------------------------------------------------

int cmd_bounds(const std::string& path) {
  const auto s = scen::Scenario::load(path);
  std::cout << "flow,config,bound_us,note\n";
  for (const auto& r : scen::analytic_bounds(s))
    std::cout << r.flow << ',' << r.config << ',' << (r.bound ? format_us(*r.bound) : "") << ',' << r.note << '\n';
  return kExitOk;
}

// ---- separation ---------------------------------------------------------------------------

int cmd_separation(const std::string& matrix, const std::string& strategy, const std::vector<std::int64_t>& intervals,
                   const std::string& out_dir) {
  const auto m = net::CommunicationMatrix::load(matrix);
  std::vector<sep::Strategy> strategies;
  if (strategy == "all") strategies.assign(std::begin(sep::kAllStrategies), std::end(sep::kAllStrategies));
  else strategies.push_back(sep::parse_strategy(strategy));

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  std::vector<std::pair<sep::Strategy, sep::SeparationMetrics>> metrics;
  std::vector<sep::AggregationRow> agg;
  auto cls = open_out(dir / "classification.csv");
  auto hist = open_out(dir / "destinations.csv");
  hist << "strategy,dest_zcs,nf_count\n";
  bool first = true;
  for (const auto st : strategies) {
    const sep::Embedder e(m, st);
    const auto nfs = sep::derive_network_flows(m, e);
    const auto met = sep::separation_metrics(nfs);
    metrics.emplace_back(st, met);
    sep::write_classification_csv(cls, st, sep::classify_paths(m, e, nfs), first);
    first = false;
    for (const auto& [n, count] : met.dest_histogram) hist << sep::strategy_name(st) << ',' << n << ',' << count << '\n';
    for (const auto iv : intervals) {
      if (iv > 0 && st == sep::Strategy::ExposedPerMessage) continue;
      agg.push_back(sep::AggregationRow{st, iv, sep::aggregation_model(m, e, iv)});
    }
  }
  auto sepf = open_out(dir / "separation.csv");
  sep::write_separation_csv(sepf, metrics);
  auto aggf = open_out(dir / "aggregation.csv");
  sep::write_aggregation_csv(aggf, agg);
  sep::write_separation_csv(std::cout, metrics);
  return kExitOk;
}

// ---- attack -------------------------------------------------------------------------------

struct AttackArgs {
  std::string fixture;
  std::string attack;
  std::string acl = "off";
  std::string acl_file;
  std::string policy = "drop";
  std::string trace;
  std::string matrix;
  std::string embedding = "domain";
  int count = 1000;
  std::string out = "out";
};

int cmd_attack(const AttackArgs& a) {
  const auto fx = atk::Fixture::load(a.fixture);
  atk::AttackOptions o;
  if (a.acl == "on") o.access = atk::AccessControl::On;
  else if (a.acl != "off") throw Error(Errc::Usage, "--acl must be on or off");
  if (a.policy == "broadcast") o.policy = netsim::MulticastPolicy::Broadcast;
  else if (a.policy != "drop") throw Error(Errc::Usage, "--policy must be drop or broadcast");
  if (!a.acl_file.empty()) o.acl = ctl::AclPolicy::load(a.acl_file);
  o.syn_count = a.count;

  atk::AttackReport r;
  if (a.attack == "host-scan") r = atk::run_host_scan(fx, o);
  else if (a.attack == "port-scan") r = atk::run_port_scan(fx, o);
  else if (a.attack == "syn-flood") r = atk::run_syn_flood(fx, o);
  else if (a.attack == "replay") {
    if (a.trace.empty() || a.matrix.empty()) throw Error(Errc::Usage, "replay needs --trace and --matrix");
    const auto m = net::CommunicationMatrix::load(a.matrix);
    const sep::Embedder e(m, sep::parse_strategy(a.embedding), {}, atk::topology_addressing(fx.topo));
    r = atk::run_replay(fx, o, atk::load_trace(a.trace), m, e);
  } else {
    throw Error(Errc::Usage, "unknown attack '" + a.attack + "'");
  }
  fs::create_directories(a.out);
  auto out = open_out(fs::path(a.out) / "attack.csv");
  atk::write_report_csv(out, {r});
  atk::write_report_csv(std::cout, {r});
  return kExitOk;
}

int cmd_gen_trace(const std::string& fixture, const std::string& matrix, const std::string& embedding,
                  const std::string& zc, std::int64_t duration_us, const std::string& out) {
  const auto fx = atk::Fixture::load(fixture);
  const auto m = net::CommunicationMatrix::load(matrix);
  const sep::Embedder e(m, sep::parse_strategy(embedding), {}, atk::topology_addressing(fx.topo));
  fx.topo.node(zc);
  const auto rows = atk::generate_trace(m, e, zc, duration_us);
  if (!fs::path(out).parent_path().empty()) fs::create_directories(fs::path(out).parent_path());
  auto f = open_out(out);
  atk::write_trace(f, rows);
  note("wrote " + std::to_string(rows.size()) + " frames to " + out);
  return kExitOk;
}

int exit_code_for(Errc c) {
  switch (c) {
    case Errc::Usage: return kExitUsage;
    case Errc::ValidationFailure: return kExitInvariant;
    default: return kExitInput;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-sensitive SDN backbone simulator and analysis tools"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Run a scenario and write latency, bound and trace CSVs");
  c_sim->add_option("scenario", sim.scenario, "Scenario JSON")->required();
  c_sim->add_option("--seed", sim.seed, "Seed (first seed of a sweep)");
  c_sim->add_option("--seeds", sim.seeds, "Run a sweep of N consecutive seeds");
  c_sim->add_option("--variant", sim.variant, "tssdn or tsn")->check(CLI::IsMember({"tssdn", "tsn"}));
  c_sim->add_option("--update", sim.update, "sync, ordered or split")->check(CLI::IsMember({"sync", "ordered", "split"}));
  c_sim->add_flag("--no-gates", sim.no_gates, "TSN variant: leave the static schedule inactive");
  c_sim->add_option("--sr-at-us", sim.sr_at_us, "Override the stream reservation start");
  c_sim->add_option("--out", sim.out, "Output directory");

  std::string b_scenario;
  auto* c_bounds = app.add_subcommand("bounds", "Print analytic latency bounds per flow and configuration");
  c_bounds->add_option("scenario", b_scenario, "Scenario JSON")->required();

  std::string s_matrix, s_strategy = "all", s_out = "out";
  std::vector<std::int64_t> s_intervals{0, 10000};
  auto* c_sep = app.add_subcommand("separation", "Network flows, path classification and aggregation model");
  c_sep->add_option("matrix", s_matrix, "Communication matrix CSV")->required();
  c_sep->add_option("--strategy", s_strategy, "all, message, topic or domain")
      ->check(CLI::IsMember({"all", "message", "topic", "domain"}));
  c_sep->add_option("--interval-us", s_intervals, "Aggregation intervals (0 = none)");
  c_sep->add_option("--out", s_out, "Output directory");

  AttackArgs atk_args;
  auto* c_atk = app.add_subcommand("attack", "Run one attack against the backbone fixture");
  c_atk->add_option("fixture", atk_args.fixture, "Attack fixture JSON")->required();
  c_atk->add_option("--attack", atk_args.attack, "host-scan, port-scan, syn-flood or replay")->required();
  c_atk->add_option("--acl", atk_args.acl, "Access control on or off");
  c_atk->add_option("--acl-file", atk_args.acl_file, "ACL overriding the fixture's");
  c_atk->add_option("--policy", atk_args.policy, "Unknown multicast with access control off: drop or broadcast");
  c_atk->add_option("--trace", atk_args.trace, "Replay trace CSV");
  c_atk->add_option("--matrix", atk_args.matrix, "Matrix defining the backbone configuration for replay");
  c_atk->add_option("--embedding", atk_args.embedding, "message, topic or domain");
  c_atk->add_option("--count", atk_args.count, "SYN flood size");
  c_atk->add_option("--out", atk_args.out, "Output directory");

  std::string g_fixture, g_matrix, g_embedding = "domain", g_zc = "FL", g_out = "trace.csv";
  std::int64_t g_duration = 30'000'000;
  auto* c_gen = app.add_subcommand("gen-trace", "Generate a replay trace of one zone's transmissions");
  c_gen->add_option("fixture", g_fixture, "Attack fixture JSON")->required();
  c_gen->add_option("matrix", g_matrix, "Communication matrix CSV")->required();
  c_gen->add_option("--embedding", g_embedding, "message, topic or domain");
  c_gen->add_option("--zc", g_zc, "Recording zone controller");
  c_gen->add_option("--duration-us", g_duration, "Recording length");
  c_gen->add_option("--out", g_out, "Output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*c_sim) return cmd_simulate(sim);
    if (*c_bounds) return cmd_bounds(b_scenario);
    if (*c_sep) return cmd_separation(s_matrix, s_strategy, s_intervals, s_out);
    if (*c_atk) return cmd_attack(atk_args);
    if (*c_gen) return cmd_gen_trace(g_fixture, g_matrix, g_embedding, g_zc, g_duration, g_out);
  } catch (const Error& e) {
    std::cerr << "tssdn: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "tssdn: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitUsage;
}
