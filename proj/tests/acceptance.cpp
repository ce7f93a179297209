// Acceptance run: one PASS/FAIL line per criterion, details indented below.
// Exit status is non-zero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nsvtp/cli/commands.hpp"
#include "properties.hpp"

namespace fs = std::filesystem;
using namespace nsvtp;
using nlohmann::json;
using sim::Grade;

namespace {

const fs::path kSamples = NSVTP_SAMPLES_DIR;

struct Report {
  std::vector<std::string> lines;
  bool ok = true;

  void check(bool cond, const std::string& what) {
    lines.push_back(std::string(cond ? "    ok   " : "    FAIL ") + what);
    ok = ok && cond;
  }
  void note(const std::string& what) { lines.push_back("    note " + what); }
};

int failures = 0;

void verdict(int n, const std::string& title, const Report& r) {
  std::cout << "criterion " << n << ": " << (r.ok ? "PASS" : "FAIL") << "  " << title << '\n';
  for (const auto& l : r.lines) std::cout << l << '\n';
  failures += !r.ok;
}

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(const std::vector<std::string>& args) {
  std::istringstream in;
  std::ostringstream out, err;
  const int code = cli::run_cli(args, in, out, err);
  return {code, out.str(), err.str()};
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fixed(double v, int digits = 6) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::vector<json> read_trace(const std::string& path) {
  std::vector<json> out;
  std::ifstream in(path);
  for (std::string l; std::getline(in, l);) {
    if (!l.empty()) out.push_back(json::parse(l));
  }
  return out;
}

std::size_t count_kind(const std::vector<json>& trace, std::string_view k) {
  std::size_t n = 0;
  for (const auto& e : trace) n += e["kind"] == k;
  return n;
}

std::size_t tx_messages_after_release(const std::vector<json>& trace) {
  bool released = false;
  std::size_t n = 0;
  for (const auto& e : trace) {
    if (released && e["to"] == sim::kTxAddress) ++n;
    if (e["kind"] == sim::kind::TxRelease) released = true;
  }
  return n;
}

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("nsvtp-acceptance-" + std::to_string(::getpid()))) {
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

struct CsvCell {
  double rho, ratio, eta;
  bool feasible;
};

std::vector<CsvCell> parse_csv(const std::string& text) {
  std::vector<CsvCell> cells;
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string rho, ratio, eta, feasible;
    std::getline(ls, rho, ',');
    std::getline(ls, ratio, ',');
    std::getline(ls, eta, ',');
    std::getline(ls, feasible, ',');
    cells.push_back({std::stod(rho), std::stod(ratio), eta.empty() ? std::nan("") : std::stod(eta),
                     feasible == "1"});
  }
  return cells;
}

// --- 1: minimum of the eta surface ----------------------------------------

void criterion_minimum(const TempDir& tmp) {
  Report r;
  const auto csv_path = tmp.file("grid.csv");
  const auto t0 = std::chrono::steady_clock::now();
  const auto run = cli({"sweep", "--config", (kSamples / "sweep.json").string(), "--out", csv_path});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.check(run.code == 0, "sweep exit code " + std::to_string(run.code));

  std::ifstream in(csv_path);
  std::stringstream ss;
  ss << in.rdbuf();
  const auto cells = parse_csv(ss.str());
  r.check(cells.size() == 625, "25x25 grid has " + std::to_string(cells.size()) + " cells");

  const CsvCell* lo = nullptr;
  for (const auto& c : cells) {
    if (c.feasible && (!lo || c.eta < lo->eta)) lo = &c;
  }
  const double r_inf = dvfs::low_power_ratio(dvfs::ModelParams{});
  if (lo) {
    r.check(lo->eta >= 0.58 && lo->eta <= 0.62,
            "min eta " + fixed(lo->eta) + " at rho=" + num(lo->rho) + " t_comp/delta=" + num(lo->ratio) +
                " within [0.58, 0.62]");
    r.note("the grid corner rho=0.1, t_comp/delta=1000 is the minimum; (rho + r)/(rho + 1) at rho=0.1 is " +
           fixed((0.1 + r_inf) / 1.1) + ", so no cell of this grid can reach 0.62");
  } else {
    r.check(false, "no feasible cell");
  }

  // rows and columns that run toward the corner decrease strictly
  bool rows_ok = true;
  bool cols_ok = true;
  const std::size_t n = 25;
  for (std::size_t j = 0; j + 1 < n && cells.size() == n * n; ++j) {
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const auto& a = cells[i * n + j];
      const auto& b = cells[(i + 1) * n + j];
      if (a.feasible && b.feasible && !(a.eta < b.eta)) rows_ok = false;
      const auto& c = cells[i * n + j + 1];
      if (a.feasible && c.feasible && !(c.eta < a.eta)) cols_ok = false;
    }
  }
  r.check(rows_ok && cols_ok, "eta decreases strictly as rho falls and as t_comp/delta grows");

  // toward the infimum along rho -> 0, delta/t_comp -> 0
  double prev = 2.0;
  bool toward = true;
  double last = 0.0;
  for (int k = 0; k <= 10; ++k) {
    const double rho = std::pow(10.0, -k);
    const double e = dvfs::eta(dvfs::ModelParams{}, {1.0, rho, 0.5 * rho * std::pow(10.0, -k)});
    toward = toward && e < prev && e > r_inf;
    prev = last = e;
  }
  r.check(toward && last - r_inf < 1e-9,
          "approaches r = " + num(r_inf) + " monotonically from above (gap " + num(last - r_inf) + " at 1e-10)");
  r.check(secs < 1.0, "25x25 sweep took " + fixed(secs, 4) + " s (< 1 s)");
  verdict(1, "eta surface minimum near 60%", r);
}

// --- 2: closed form against the energy ratio ---------------------------------

void criterion_consistency() {
  Report r;
  const auto ratio = props::eq1_consistency(10000);
  r.check(ratio.ok(), std::to_string(ratio.cases) + " random feasible (p, c): |eta - E_nsvtp/E_base| < 1e-12 relative" +
                          (ratio.first.empty() ? "" : "; " + ratio.first));
  const auto zero = props::delta_zero_closed_form(10000);
  r.check(zero.ok(), std::to_string(zero.cases) + " cases: delta=0 gives (rho + r)/(rho + 1) within 1e-14" +
                         (zero.first.empty() ? "" : "; " + zero.first));
  verdict(2, "closed form agrees with the energy ratio", r);
}

// --- 3: simulated energy against the closed form -----------------------------

void criterion_simulation() {
  Report r;
  struct Scenario {
    double t_comp, rho, delta;
    std::vector<std::string> extra;
  };
  std::vector<Scenario> scenarios;
  for (const double rho : {0.1, 0.5, 1.0, 2.0, 10.0}) {
    for (const double frac : {0.0, 0.01, 0.3, 1.0}) {
      const double t = rho == 1.0 ? 1.0 : 0.25 * (1.0 + rho);
      scenarios.push_back({t, rho, frac * t / (2.0 * rho), {}});
    }
  }
  scenarios.push_back({1.0, 1.0, 0.01, {"--tx-mode", "direct"}});
  scenarios.push_back({2.0, 0.5, 0.02, {"--hop-delay", "0.001"}});
  scenarios.push_back({3.0, 3.0, 0.5, {"--tx-mode", "direct", "--hop-delay", "0.0002"}});
  scenarios.push_back({0.01, 4.0, 0.01 / 8.0, {}});
  scenarios.push_back({100.0, 0.2, 7.5, {"--seed", "99"}});

  std::size_t passed = 0;
  std::size_t boundary = 0;
  double worst = 0.0;
  for (const auto& s : scenarios) {
    std::vector<std::string> args{"simulate", "--cycles", "100", "--t-comp", num(s.t_comp),
                                  "--rho", num(s.rho), "--delta", num(s.delta)};
    args.insert(args.end(), s.extra.begin(), s.extra.end());
    const auto run = cli(args);
    if (run.code != 0) {
      r.check(false, "simulate t_comp=" + num(s.t_comp) + " rho=" + num(s.rho) + " delta=" + num(s.delta) +
                         " exited " + std::to_string(run.code) + ": " + run.err);
      continue;
    }
    const auto rep = json::parse(run.out);
    const double diff = rep["abs_diff"].get<double>();
    worst = std::max(worst, diff);
    passed += diff < 1e-9;
    boundary += s.delta > 0 && s.delta == s.t_comp / (2.0 * s.rho);
  }
  r.check(passed == scenarios.size(), std::to_string(passed) + "/" + std::to_string(scenarios.size()) +
                                          " scenarios with |eta_sim - eta_closed_form| < 1e-9 (worst " +
                                          num(worst) + ")");
  r.check(scenarios.size() >= 20, std::to_string(scenarios.size()) + " scenarios (>= 20)");
  r.check(boundary >= 5, std::to_string(boundary) + " scenarios at the boundary delta = t_comp/(2 rho)");
  verdict(3, "simulated energy matches the closed form", r);
}

// --- 4: property suites --------------------------------------------------------

void criterion_properties() {
  Report r;
  for (const auto& o : props::all(1000)) {
    r.check(o.ok() && o.cases >= 1000, o.name + ": " + std::to_string(o.cases - o.failures) + "/" +
                                           std::to_string(o.cases) + " cases" +
                                           (o.first.empty() ? "" : "; " + o.first));
  }
  verdict(4, "property suites at 1000 cases each", r);
}

// --- 5: exchange protocol ------------------------------------------------------

void criterion_protocol(const TempDir& tmp) {
  Report r;
  const auto demo_trace = tmp.file("demo.jsonl");
  auto run = cli({"tx-demo", "--config", (kSamples / "scenario-default.json").string(), "--trace", demo_trace});
  r.check(run.code == 0, "tx-demo exit code " + std::to_string(run.code));
  const auto demo = read_trace(demo_trace);

  // single use: one release per deposit, every relay key deposited once
  r.check(count_kind(demo, sim::kind::TxDeposit) == 1 && count_kind(demo, sim::kind::TxRelease) == 1,
          "tx-demo trace: 1 deposit, 1 release");

  const auto sim_trace = tmp.file("sim.jsonl");
  run = cli({"simulate", "--config", (kSamples / "scenario-rotation.json").string(), "--trace", sim_trace});
  r.check(run.code == 0, "simulate (rotation) exit code " + std::to_string(run.code));
  const auto simt = read_trace(sim_trace);
  std::set<std::string> keys;
  std::size_t deposits = 0;
  for (const auto& e : simt) {
    if (e["kind"] == sim::kind::TxDeposit) {
      ++deposits;
      keys.insert(e["detail"]["relay_key"].get<std::string>());
    }
  }
  r.check(deposits == 2 && keys.size() == deposits && count_kind(simt, sim::kind::TxRelease) == deposits,
          "simulate trace with rotation: " + std::to_string(deposits) + " deposits, distinct relay keys, one release each");
  {
    tx::TrustedExchange ex;
    struct Oracle : tx::LayerOracle {
      std::optional<LayerIndex> layer_of(const codec::ResourceId&) const override { return LayerIndex{4}; }
    } oracle;
    const Bytes k = to_bytes("k"), k1 = to_bytes("k1"), k2 = to_bytes("k2");
    ex.deposit({k1, tx::seal_deposit(tx::seal_blueprint("b", k), k, k1), LayerIndex{4}, codec::ResourceId("s")}, 0.0);
    ex.claim(codec::ResourceId("n"), {k1, LayerIndex{4}, k2}, oracle, 0.0);
    const auto second = props::code_of([&] { ex.claim(codec::ResourceId("n"), {k1, LayerIndex{4}, k2}, oracle, 0.0); });
    r.check(second == ErrorCode::AlreadyClaimed, "second claim on a consumed deposit: " + props::name_of(second));
  }

  // layer mismatch
  const auto bad_trace = tmp.file("impostor.jsonl");
  run = cli({"tx-demo", "--claimant-layer", "3", "--trace", bad_trace});
  const auto bad = read_trace(bad_trace);
  r.check(run.code == 1 && run.err.find("LayerMismatch") != std::string::npos,
          "impostor on layer 3: exit " + std::to_string(run.code) + ", LayerMismatch");
  r.check(count_kind(bad, sim::kind::TxClaim) == 1 && count_kind(bad, sim::kind::TxRelease) == 0 &&
              count_kind(bad, sim::kind::PathwayEstablished) == 0,
          "impostor trace: claim recorded, nothing released, no pathway");

  // seal integrity
  json deposited_ev, released_ev, received;
  for (const auto& e : demo) {
    if (e["kind"] == sim::kind::TxDeposit) deposited_ev = e["detail"];
    if (e["kind"] == sim::kind::TxRelease) released_ev = e["detail"];
    if (e["kind"] == sim::kind::BlueprintReceived && received.is_null()) received = e["detail"];
  }
  const auto sample_text = sim::read_text_file(kSamples / "dvfs-high.scheme");
  const auto deposited = scheme::parse_blueprint(sample_text);
  const auto digest = sim::text_digest(scheme::print_blueprint(deposited));
  r.check(!released_ev.is_null() && released_ev["capsule_bytes"] == deposited_ev["capsule_bytes"] &&
              released_ev["blueprint_fnv"] == deposited_ev["blueprint_fnv"] &&
              deposited_ev["blueprint_fnv"] == digest,
          "released capsule unseals to the deposited text (fnv " + digest + ")");
  json schemes = json::array();
  for (const auto& s : deposited.schemes) schemes.push_back(s.name);
  r.check(!received.is_null() && received["model"] == deposited.model && received["revision"] == deposited.revision &&
              received["schemes"] == schemes,
          "north parses the deposited blueprint (" + deposited.model + " rev " + std::to_string(deposited.revision) + ")");
  {
    const auto& text = sample_text;
    const Bytes k = to_bytes("north"), k1 = to_bytes("relay");
    const auto [cap, key] = tx::open_deposit(tx::seal_deposit(tx::seal_blueprint(text, k), k, k1), k1);
    r.check(tx::unseal_blueprint(cap, key) == text, "unseal(claimed bytes, returned key) is byte-identical to the sample");
  }

  // post-initiation independence
  r.check(tx_messages_after_release(demo) == 0, "tx-demo: 0 messages to the exchange after release");
  const auto default_trace = tmp.file("default.jsonl");
  run = cli({"simulate", "--config", (kSamples / "scenario-default.json").string(), "--trace", default_trace});
  const auto deft = read_trace(default_trace);
  std::size_t after = 0;
  bool seen = false;
  for (const auto& e : deft) {
    if (seen && e["to"] == sim::kTxAddress) ++after;
    if (e["kind"] == sim::kind::TxRelease) seen = true;
  }
  r.check(run.code == 0 && seen && after == 0, "simulate (100 cycles): 0 messages to the exchange after release");
  verdict(5, "exchange protocol conformance", r);
}

// --- 6: non-invasiveness -------------------------------------------------------

void criterion_non_invasive() {
  Report r;
  const auto run = cli({"simulate", "--config", (kSamples / "scenario-default.json").string()});
  const auto rep = json::parse(run.out);
  r.check(rep["middle_layer_decodes"].get<int>() == 0,
          "middle-layer decodes over a full simulate run: " + rep["middle_layer_decodes"].dump());

  auto cfg = sim::load_scenario(kSamples / "scenario-default.json");
  cfg.cycles = 60;
  const auto on = sim::run_once(cfg, true);
  const auto off = sim::run_once(cfg, false);
  bool same = on.results.size() == off.results.size();
  for (std::size_t i = 0; same && i < on.results.size(); ++i) {
    same = on.results[i].payload == off.results[i].payload && on.results[i].result == off.results[i].result;
  }
  r.check(same && on.results.size() == 60, "main-call payloads and results byte-identical with NSVTP on vs off (" +
                                               std::to_string(on.results.size()) + " calls)");

  const auto clean = sim::sorted_results(on.results);
  for (const auto& [from, to] : {std::pair{Grade::High, Grade::High}, std::pair{Grade::Low, Grade::Low},
                                std::pair{Grade::Low, Grade::High}}) {
    auto broken = sim::default_scenario();
    broken.cycles = 60;
    broken.delta = cfg.delta;
    broken.stack = sim::default_stack(from);
    broken.pool = {{"", "cpu-core-099", "cpu", 0, 0, to, ""}};
    broken.failures.push_back({"cpu-core-017", 17.25, 1.5});
    const auto got = sim::run_once(broken, true);
    const bool rotated = got.trace.count(sim::kind::Rotation) == 1;
    r.check(rotated && sim::sorted_results(got.results) == clean,
            std::string("rotation ") + std::string(sim::grade_name(from)) + " -> " +
                std::string(sim::grade_name(to)) + " keeps the completed-call multiset");
  }
  verdict(6, "middle layers stay untouched", r);
}

}  // namespace

int main() {
  TempDir tmp;
  try {
    criterion_minimum(tmp);
    criterion_consistency();
    criterion_simulation();
    criterion_properties();
    criterion_protocol(tmp);
    criterion_non_invasive();
  } catch (const std::exception& e) {
    std::cout << "acceptance aborted: " << e.what() << '\n';
    return 2;
  }
  std::cout << (failures == 0 ? "all criteria pass" : std::to_string(failures) + " criterion(s) fail") << '\n';
  return failures == 0 ? 0 : 1;
}
