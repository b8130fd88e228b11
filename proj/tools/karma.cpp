// karma: simulate, solve, analyze and serve the karma allocation game.

#include <csignal>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "karma/agents.hpp"
#include "karma/config.hpp"
#include "karma/equilibrium.hpp"
#include "karma/error.hpp"
#include "karma/fees.hpp"
#include "karma/manifest.hpp"
#include "karma/server/session.hpp"
#include "karma/server/transport.hpp"
#include "karma/simulator.hpp"
#include "karma/stats.hpp"
#include "karma/trace.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace karma;

namespace {

enum Exit : int { kOk = 0, kFailure = 1, kConfigFail = 2, kConvergenceFail = 3, kIoFail = 4 };

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

const CLI::Validator kDiscount(
    [](std::string& s) -> std::string {
      double a = 0.0;
      try {
        std::size_t used = 0;
        a = std::stod(s, &used);
        if (used != s.size()) return "not a number: " + s;
      } catch (const std::exception&) {
        return "not a number: " + s;
      }
      if (!(a >= 0.0 && a < 1.0)) return "discount must lie in [0, 1), got " + s;
      return {};
    },
    "in [0,1)", "discount");

RunManifest start_manifest(const std::string& command, const std::vector<std::string>& argv,
                           const std::string& config_ref, const GameConfig& config, std::uint64_t seed) {
  RunManifest m;
  m.command = command;
  m.argv = argv;
  m.config_ref = config_ref;
  m.config = config;
  m.seed = seed;
  return m;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string config = "low-binary";
  std::string agents;
  std::string baseline;
  std::string policy_file;
  int games = 100;
  std::uint64_t seed = 1;
  double alpha = 0.98;
  int threads = 0;
  bool traces = false;
  std::string out;
};

int cmd_simulate(const SimulateArgs& a, const std::vector<std::string>& argv) {
  auto t0 = Clock::now();
  GameConfig config = load_config(a.config);
  if (a.games < 1) throw ConfigError("--games must be positive");

  BatchResult batch;
  json extra;
  if (!a.baseline.empty()) {
    Baseline kind = a.baseline == "random"        ? Baseline::RandomAllocation
                    : a.baseline == "turn-taking" ? Baseline::TurnTaking
                                                  : throw ConfigError("unknown baseline '" + a.baseline + "'");
    batch = simulate_baseline(config, kind, a.games, a.seed, a.threads, a.traces);
    extra["baseline"] = a.baseline;
  } else {
    BatchSpec spec;
    spec.config = config;
    spec.population =
        parse_population(a.agents.empty() ? "policy:" + std::to_string(config.n_participants) : a.agents);
    if (!a.policy_file.empty()) {
      std::ifstream in(a.policy_file);
      if (!in) throw IoError("cannot read policy file " + a.policy_file);
      auto policy = std::make_shared<const Policy>(policy_from_json(json::parse(in), config));
      for (auto& s : spec.population)
        if (s.kind == AgentKind::Policy) s.policy = policy;
      extra["policy_file"] = a.policy_file;
    }
    spec.n_games = a.games;
    spec.base_seed = a.seed;
    spec.default_alpha = a.alpha;
    spec.threads = a.threads;
    spec.keep_traces = a.traces;
    batch = run_batch(std::move(spec));
    extra["agents"] = describe(parse_population(a.agents.empty() ? "policy:" + std::to_string(config.n_participants)
                                                                 : a.agents));
    extra["default_alpha"] = a.alpha;
  }
  extra["games"] = a.games;

  auto dir = make_run_dir(output_base(a.out), "simulate");
  auto manifest = start_manifest("simulate", argv, a.config, config, a.seed);
  {
    auto out = open_output(dir / "dataset.csv");
    write_dataset(out, batch.rows);
  }
  manifest.outputs.push_back("dataset.csv");
  if (a.traces && !batch.traces.empty()) {
    auto out = open_output(dir / "traces.jsonl");
    for (std::size_t g = 0; g < batch.traces.size(); ++g)
      write_trace(out, config, batch.traces[g], "game-" + std::to_string(g));
    manifest.outputs.push_back("traces.jsonl");
  }

  auto report = summarize(batch.rows, a.baseline.empty() ? "karma" : a.baseline);
  extra["median_gain"] = report.median;
  extra["mean_gain"] = report.mean;
  manifest.extra = extra;
  manifest.duration_s = seconds_since(t0);
  write_manifest(dir, manifest);

  std::cout << "rows " << batch.rows.size() << "  median gain " << report.median << "  mean gain "
            << report.mean << "\n"
            << dir.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// equilibrium

struct EquilibriumArgs {
  std::string config = "low-binary";
  double alpha = 0.98;
  double damping = 0.5;
  double tol = 1e-6;
  int max_iters = 1000;
  int check_games = 0;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_equilibrium(const EquilibriumArgs& a, const std::vector<std::string>& argv) {
  auto t0 = Clock::now();
  GameConfig config = load_config(a.config);
  SolverOptions opts;
  opts.discount = a.alpha;
  opts.damping = a.damping;
  opts.tol = a.tol;
  opts.max_iters = a.max_iters;
  validate(opts);
  auto eq = solve_equilibrium(config, opts);

  auto dir = make_run_dir(output_base(a.out), "equilibrium");
  auto manifest = start_manifest("equilibrium", argv, a.config, config, a.seed);
  json policy = policy_to_json(eq.policy, config);
  policy["discount"] = a.alpha;
  {
    auto out = open_output(dir / "policy.json");
    out << policy.dump(1) << '\n';
  }
  json report{{"discount", a.alpha},
              {"converged", eq.converged},
              {"iterations", eq.iterations},
              {"policy_change", eq.policy_change},
              {"bid_change", eq.bid_change},
              {"exploitability", eq.exploitability},
              {"tolerance", a.tol},
              {"residual_history", eq.residual_history},
              {"mean_field", mean_field_to_json(eq.mean_field)}};
  if (a.check_games > 0) {
    BatchSpec spec;
    spec.config = config;
    spec.population = {AgentSpec{AgentKind::Policy, config.n_participants, a.alpha,
                                 std::make_shared<const Policy>(eq.policy), {}}};
    spec.n_games = a.check_games;
    spec.base_seed = a.seed;
    auto batch = run_batch(std::move(spec));
    auto r = summarize(batch.rows, "policy");
    report["simulated"] = {{"games", a.check_games}, {"median_gain", r.median}, {"mean_gain", r.mean}};
    std::cout << "simulated median gain " << r.median << " over " << a.check_games << " games\n";
  }
  {
    auto out = open_output(dir / "convergence.json");
    out << report.dump(1) << '\n';
  }
  manifest.outputs = {"policy.json", "convergence.json"};
  manifest.extra = {{"discount", a.alpha}, {"converged", eq.converged}};
  manifest.duration_s = seconds_since(t0);
  write_manifest(dir, manifest);

  std::cout << (eq.converged ? "converged" : "NOT converged") << " after " << eq.iterations
            << " iterations  exploitability " << eq.exploitability << "\n"
            << dir.string() << "\n";
  if (!eq.converged) {
    std::cerr << "karma: equilibrium did not reach tolerance " << a.tol << "; best iterate saved\n";
    return kConvergenceFail;
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeArgs {
  std::vector<std::string> datasets;
  std::string random;
  bool halves = false;
  int bootstrap = 1000;
  double level = 0.95;
  std::uint64_t seed = 1;
  std::string out;
};

struct Labelled {
  std::string label;
  std::string path;
  Dataset rows;
};

// "label=path" or "path"; a run directory stands for its dataset.csv.
Labelled load_labelled(const std::string& arg) {
  Labelled d;
  auto eq = arg.find('=');
  d.path = eq == std::string::npos ? arg : arg.substr(eq + 1);
  if (fs::is_directory(d.path)) d.path = (fs::path(d.path) / "dataset.csv").string();
  if (eq != std::string::npos) {
    d.label = arg.substr(0, eq);
  } else {
    fs::path p(d.path);
    d.label = p.filename() == "dataset.csv" ? p.parent_path().filename().string() : p.stem().string();
  }
  d.rows = read_dataset_file(d.path);
  if (d.rows.empty()) throw IoError(d.path + ": no rows");
  return d;
}

std::vector<double> half_gains(const Dataset& rows, int half) {
  std::vector<double> g;
  for (const auto& r : rows) {
    if (r.dropped) continue;
    g.push_back(half == 1 ? efficiency_gain(r.S_h1, r.S_rand_h1) : efficiency_gain(r.S_h2, r.S_rand_h2));
  }
  return g;
}

int cmd_analyze(const AnalyzeArgs& a, const std::vector<std::string>& argv) {
  auto t0 = Clock::now();
  std::vector<Labelled> sets;
  std::set<std::string> labels;
  for (const auto& s : a.datasets) {
    sets.push_back(load_labelled(s));
    auto& label = sets.back().label;
    for (int n = 2; labels.count(label); ++n) label = sets.back().label + "#" + std::to_string(n);
    labels.insert(label);
  }

  auto dir = make_run_dir(output_base(a.out), "analyze");
  RunManifest manifest;
  manifest.command = "analyze";
  manifest.argv = argv;
  manifest.seed = a.seed;
  manifest.config = nullptr;
  manifest.extra["inputs"] = a.datasets;
  if (!a.random.empty()) manifest.extra["random"] = a.random;

  json report{{"treatments", json::array()}, {"mww", json::array()}};

  // Figure-2-style: medians with bootstrap intervals.
  {
    auto out = open_output(dir / "medians.csv");
    out << "treatment,n,median,ci_lo,ci_hi,mean,non_adopters\n";
    for (std::size_t i = 0; i < sets.size(); ++i) {
      auto r = summarize(sets[i].rows, sets[i].label);
      auto ci = bootstrap_median_ci(r.gains, a.bootstrap, a.level, derive_seed(a.seed, i));
      json j = to_json(r);
      j["median_ci"] = {ci.lo, ci.hi};
      j["source"] = sets[i].path;
      report["treatments"].push_back(j);
      out << sets[i].label << ',' << r.n << ',' << format_number(r.median) << ',' << format_number(ci.lo)
          << ',' << format_number(ci.hi) << ',' << format_number(r.mean) << ',' << r.non_adopters << '\n';
    }
    manifest.outputs.push_back("medians.csv");
  }

  // Pairwise MWW matrix, upper triangle including the diagonal.
  {
    auto out = open_output(dir / "mww.csv");
    out << "x,y,n_x,n_y,U,p_value,exact\n";
    for (std::size_t i = 0; i < sets.size(); ++i)
      for (std::size_t j = i; j < sets.size(); ++j) {
        if (i == j && sets.size() > 1) continue;
        auto gx = gains_of(sets[i].rows), gy = gains_of(sets[j].rows);
        auto t = mww_test(gx, gy);
        json e = to_json(t);
        e["x"] = sets[i].label;
        e["y"] = sets[j].label;
        report["mww"].push_back(e);
        out << sets[i].label << ',' << sets[j].label << ',' << t.n_x << ',' << t.n_y << ','
            << format_number(t.U) << ',' << format_number(t.p_value) << ',' << (t.exact ? 1 : 0) << '\n';
      }
    manifest.outputs.push_back("mww.csv");
  }

  // Figure-3-style decile curves, optionally against random allocation.
  {
    auto out = open_output(dir / "deciles.csv");
    std::optional<Dataset> random;
    if (!a.random.empty()) random = load_labelled(a.random).rows;
    out << "decile";
    for (const auto& s : sets) out << ',' << s.label;
    if (random) out << ",random,random_lo,random_hi";
    out << '\n';
    std::vector<std::array<double, 10>> curves;
    json comparisons = json::object();
    std::optional<DecileComparison> first_cmp;
    for (std::size_t i = 0; i < sets.size(); ++i) {
      auto g = gains_of(sets[i].rows);
      if (g.size() < 10) throw StateError(sets[i].label + ": need at least 10 rows for deciles");
      curves.push_back(decile_means(g));
      if (random) {
        auto cmp = decile_comparison(sets[i].rows, *random, a.bootstrap, a.level, derive_seed(a.seed, 100 + i));
        if (!first_cmp) first_cmp = cmp;
        comparisons[sets[i].label] = {{"gap", cmp.gap},
                                      {"above_random_mean", cmp.above_random_mean},
                                      {"above_random_upper", cmp.above_random_upper}};
      }
    }
    for (int d = 0; d < 10; ++d) {
      out << d + 1;
      for (const auto& c : curves) out << ',' << format_number(c[d]);
      if (first_cmp)
        out << ',' << format_number(first_cmp->random[d]) << ',' << format_number(first_cmp->random_lo[d]) << ','
            << format_number(first_cmp->random_hi[d]);
      out << '\n';
    }
    if (random) {
      report["random"] = {{"source", a.random},
                          {"deciles", first_cmp->random},
                          {"deciles_lo", first_cmp->random_lo},
                          {"deciles_hi", first_cmp->random_hi}};
      report["decile_comparison"] = comparisons;
    }
    manifest.outputs.push_back("deciles.csv");
  }

  if (a.halves) {
    auto out = open_output(dir / "halves.csv");
    out << "treatment,n,median_h1,median_h2,U,p_value,exact\n";
    json halves = json::array();
    for (const auto& s : sets) {
      auto t = first_vs_second_half(s.rows);
      double m1 = median(half_gains(s.rows, 1)), m2 = median(half_gains(s.rows, 2));
      json e = to_json(t);
      e["treatment"] = s.label;
      e["median_h1"] = m1;
      e["median_h2"] = m2;
      halves.push_back(e);
      out << s.label << ',' << t.n_x << ',' << format_number(m1) << ',' << format_number(m2) << ','
          << format_number(t.U) << ',' << format_number(t.p_value) << ',' << (t.exact ? 1 : 0) << '\n';
    }
    report["halves"] = halves;
    manifest.outputs.push_back("halves.csv");
  }

  {
    auto out = open_output(dir / "report.json");
    out << report.dump(1) << '\n';
    manifest.outputs.push_back("report.json");
  }
  manifest.duration_s = seconds_since(t0);
  write_manifest(dir, manifest);

  for (const auto& t : report["treatments"])
    std::cout << t["treatment"].get<std::string>() << ": n " << t["n"] << "  median " << t["median"] << "\n";
  std::cout << dir.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// serve

struct ServeArgs {
  std::string config = "low-binary";
  int port = 7070;
  int admin_port = 7071;
  std::string bots;
  int humans = 1;
  int sessions = 1;
  std::uint64_t seed = 1;
  double alpha = 0.98;
  std::string out;
};

void export_session(const server::Session& s, const fs::path& dir, const std::vector<std::string>& argv) {
  auto sdir = dir / s.id();
  fs::create_directories(sdir);
  RunManifest m = start_manifest("serve", argv, "", s.config(), s.config().seed);
  m.extra = s.summary();
  {
    auto out = open_output(sdir / "trace.jsonl");
    write_trace(out, s.config(), s.trace(), s.id());
    m.outputs.push_back("trace.jsonl");
  }
  if (s.finished()) {
    auto out = open_output(sdir / "dataset.csv");
    write_dataset(out, s.export_dataset());
    m.outputs.push_back("dataset.csv");
    json pay = json::array();
    for (int i = 0; i < s.config().n_participants; ++i) {
      auto p = s.payoff(i);
      pay.push_back({{"seat", i}, {"bonus", p.bonus}, {"fixed", p.fixed}, {"total", p.total()}});
    }
    auto pout = open_output(sdir / "payoffs.json");
    pout << pay.dump(1) << '\n';
    m.outputs.push_back("payoffs.json");
  }
  write_manifest(sdir, m);
}

int cmd_serve(const ServeArgs& a, const std::vector<std::string>& argv) {
  GameConfig config = load_config(a.config);
  if (a.humans < 0 || a.humans > config.n_participants) throw ConfigError("--humans out of range");
  std::string bots =
      a.bots.empty() ? "policy:" + std::to_string(config.n_participants - a.humans) : a.bots;

  // Block termination signals in every thread; the main thread waits for them.
  sigset_t sigs;
  sigemptyset(&sigs);
  sigaddset(&sigs, SIGINT);
  sigaddset(&sigs, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &sigs, nullptr);

  auto dir = make_run_dir(output_base(a.out), "serve");
  server::SessionManager manager;
  for (int i = 0; i < a.sessions; ++i) {
    json body{{"humans", a.humans}, {"bots", bots}, {"alpha", a.alpha}};
    auto spec = server::spec_from_request(body, config);
    auto s = manager.create(std::move(spec), a.seed + i);
    if (s->tokens().empty()) s->start();
    std::cout << "session " << s->id() << " seed " << a.seed + i << "\n";
    for (const auto& t : s->tokens()) std::cout << "  token " << t << "\n";
  }

  server::GameServer game(manager);
  game.start(a.port);
  server::AdminServer admin(manager, config, bots, a.seed + a.sessions);
  admin.start(a.admin_port);
  std::cout << "game port " << game.port() << "  admin port " << admin.port() << "\n"
            << "output " << dir.string() << std::endl;

  std::set<std::string> exported;
  timespec poll_interval{0, 500'000'000};
  for (;;) {
    int sig = sigtimedwait(&sigs, nullptr, &poll_interval);
    for (const auto& s : manager.all())
      if (s->finished() && exported.insert(s->id()).second) {
        export_session(*s, dir, argv);
        std::cout << "session " << s->id() << " finished, exported" << std::endl;
      }
    if (sig == SIGINT || sig == SIGTERM) break;
  }

  std::cout << "shutting down" << std::endl;
  admin.stop();
  game.stop();
  for (const auto& s : manager.all())
    if (!exported.count(s->id())) export_session(*s, dir, argv);
  RunManifest m = start_manifest("serve", argv, a.config, config, a.seed);
  for (const auto& s : manager.all()) m.outputs.push_back(s->id() + "/manifest.json");
  write_manifest(dir, m);
  return kOk;
}

// ---------------------------------------------------------------------------
// play: terminal client for one seat

struct PlayArgs {
  std::string host = "127.0.0.1";
  int port = 7070;
  std::string token;
  std::string strategy;  // empty: ask on stdin
};

int cmd_play(const PlayArgs& a) {
  using namespace server;
  GameClient client(a.host, a.port);
  client.send(Join{a.token});
  std::unique_ptr<Agent> bot;
  Scheme scheme = Scheme::Binary;
  if (!a.strategy.empty()) {
    auto pop = parse_population(a.strategy + ":1");
    if (pop[0].kind == AgentKind::Policy || pop[0].kind == AgentKind::Scripted)
      throw ConfigError("play --strategy supports zero, random, threshold");
    bot = std::move(make_agents(pop, std::random_device{}())[0]);
  }
  for (;;) {
    auto msg = client.receive(60'000);
    if (!msg) continue;
    if (auto* w = std::get_if<Welcome>(&*msg)) {
      scheme = scheme_from_string(w->scheme);
      std::cout << "seat " << w->seat << " of " << w->n_participants << ", scheme " << w->scheme << "\n";
    } else if (auto* r = std::get_if<RoundStart>(&*msg)) {
      std::cout << "\nround " << r->round_in_phase << " (" << r->phase << ")  urgency " << r->urgency
                << "  karma " << r->karma << "  bids " << r->allowed_bids.front() << ".."
                << r->allowed_bids.back() << "\n";
      int bid = 0;
      if (bot) {
        Observation o;
        o.urgency = r->urgency;
        o.high_urgency = r->high_urgency;
        o.karma = r->karma;
        o.round = r->round;
        o.test_round = r->phase == "test";
        o.scheme = scheme;
        bid = bot->decide(o);
      } else {
        std::cout << "bid> " << std::flush;
        if (!(std::cin >> bid)) return kOk;
      }
      client.send(BidSubmit{r->round, bid});
    } else if (auto* ack = std::get_if<BidAck>(&*msg)) {
      if (!ack->accepted) std::cout << "bid rejected: " << ack->reason << "\n";
    } else if (auto* res = std::get_if<RoundResult>(&*msg)) {
      std::cout << (res->won ? "won" : "lost") << "  opponent bid " << res->opponent_bid << "  paid "
                << res->payment << "  karma " << res->karma_after << "  score " << res->score_after
                << (res->timed_out ? "  (timed out)" : "") << "\n";
    } else if (auto* end = std::get_if<GameEnd>(&*msg)) {
      std::cout << "\nfinal score " << end->final_score << "  bonus $" << end->bonus_fee << "  fixed $"
                << end->fixed_fee << "\n";
      return kOk;
    } else if (auto* err = std::get_if<ErrorMessage>(&*msg)) {
      std::cerr << "server: " << err->message << "\n";
      return kFailure;
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"karma mechanism lab: simulate, solve equilibria, analyze datasets, run live sessions"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  std::vector<std::string> args(argv, argv + argc);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "run batches of simulated games");
  simulate->add_option("config", sim.config, "preset name or JSON config path");
  simulate->add_option("--agents", sim.agents, "population, e.g. policy:18,zero:2 or policy@0.5:20");
  simulate->add_option("--baseline", sim.baseline, "random | turn-taking")
      ->check(CLI::IsMember({"random", "turn-taking"}));
  simulate->add_option("--policy", sim.policy_file, "policy JSON used by every policy agent");
  simulate->add_option("--games", sim.games, "number of games")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sim.seed, "base seed; game i uses seed+i");
  simulate->add_option("--alpha", sim.alpha, "default discount for policy agents")->check(kDiscount);
  simulate->add_option("--threads", sim.threads, "worker threads (0: all cores)");
  simulate->add_flag("--traces", sim.traces, "also write per-round traces");
  simulate->add_option("--out", sim.out, "output base directory (default $KARMA_OUT_DIR or ./runs)");

  EquilibriumArgs eqa;
  auto* equilibrium = app.add_subcommand("equilibrium", "solve the stationary equilibrium policy");
  equilibrium->add_option("config", eqa.config, "preset name or JSON config path");
  equilibrium->add_option("--alpha", eqa.alpha, "discount factor in [0,1)")->check(kDiscount);
  equilibrium->add_option("--damping", eqa.damping, "initial policy damping");
  equilibrium->add_option("--tol", eqa.tol, "convergence tolerance");
  equilibrium->add_option("--max-iters", eqa.max_iters, "outer iteration cap");
  equilibrium->add_option("--check-games", eqa.check_games, "simulate this many all-policy games");
  equilibrium->add_option("--seed", eqa.seed, "seed for --check-games");
  equilibrium->add_option("--out", eqa.out, "output base directory");

  AnalyzeArgs an;
  auto* analyze = app.add_subcommand("analyze", "efficiency reports, MWW tests, decile curves");
  analyze->add_option("datasets", an.datasets, "dataset CSVs or run directories, optionally label=path")
      ->required();
  analyze->add_option("--random", an.random, "random-allocation dataset for the decile comparison");
  analyze->add_flag("--halves", an.halves, "first versus second half analysis");
  analyze->add_option("--bootstrap", an.bootstrap, "bootstrap resamples")->check(CLI::PositiveNumber);
  analyze->add_option("--level", an.level, "interval level")->check(CLI::Range(0.5, 0.999));
  analyze->add_option("--seed", an.seed, "bootstrap seed");
  analyze->add_option("--out", an.out, "output base directory");

  ServeArgs sv;
  auto* serve = app.add_subcommand("serve", "run the live experiment server");
  serve->add_option("config", sv.config, "preset name or JSON config path");
  serve->add_option("--port", sv.port, "game port (length-prefixed JSON frames)");
  serve->add_option("--admin-port", sv.admin_port, "HTTP admin port");
  serve->add_option("--bots", sv.bots, "bot population for each session, e.g. policy:19");
  serve->add_option("--humans", sv.humans, "human seats per session");
  serve->add_option("--sessions", sv.sessions, "sessions created at startup");
  serve->add_option("--seed", sv.seed, "seed of the first session");
  serve->add_option("--alpha", sv.alpha, "default bot discount")->check(kDiscount);
  serve->add_option("--out", sv.out, "output base directory");

  PlayArgs pl;
  auto* play = app.add_subcommand("play", "join a live session from the terminal");
  play->add_option("--host", pl.host, "server host");
  play->add_option("--port", pl.port, "game port");
  play->add_option("--token", pl.token, "seat token")->required();
  play->add_option("--strategy", pl.strategy, "bid automatically: zero | random | threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kConfigFail;
  }

  try {
    if (*simulate) return cmd_simulate(sim, args);
    if (*equilibrium) return cmd_equilibrium(eqa, args);
    if (*analyze) return cmd_analyze(an, args);
    if (*serve) return cmd_serve(sv, args);
    if (*play) return cmd_play(pl);
  } catch (const ConfigError& e) {
    std::cerr << "karma: config error: " << e.what() << "\n";
    return kConfigFail;
  } catch (const ConvergenceError& e) {
    std::cerr << "karma: " << e.what() << " (residual " << e.residual() << ")\n";
    return kConvergenceFail;
  } catch (const IoError& e) {
    std::cerr << "karma: i/o error: " << e.what() << "\n";
    return kIoFail;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "karma: malformed JSON: " << e.what() << "\n";
    return kConfigFail;
  } catch (const std::exception& e) {
    std::cerr << "karma: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
