#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <json.hpp>

#include "dualprice/dual.hpp"
#include "dualprice/error.hpp"
#include "dualprice/geometry.hpp"
#include "dualprice/numerics.hpp"
#include "dualprice/oracle.hpp"
#include "dualprice/pricing.hpp"
#include "dualprice/recovery.hpp"
#include "dualprice/scenario.hpp"
#include "dualprice/scenarios.hpp"
#include "dualprice/utility.hpp"

#ifndef DUALPRICE_VERSION_STRING
#define DUALPRICE_VERSION_STRING "0.0.0"
#endif

namespace dualprice::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

std::string yes(bool b) { return b ? "yes" : "no"; }

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

struct Report {
  std::vector<std::pair<std::string, std::string>> fields;
  std::vector<Table> tables;
  std::vector<std::string> failures;

  void add(const std::string& k, const std::string& v) { fields.emplace_back(k, v); }
  void add(const std::string& k, double v) { fields.emplace_back(k, num(v)); }
  void add(const std::string& k, std::size_t v) { fields.emplace_back(k, std::to_string(v)); }
  void add(const std::string& k, int v) { fields.emplace_back(k, std::to_string(v)); }
  void add(const std::string& k, bool v) { fields.emplace_back(k, yes(v)); }
  Table& table(std::string name, std::vector<std::string> cols) {
    tables.push_back({std::move(name), std::move(cols), {}});
    return tables.back();
  }
  void check(const std::string& name, bool ok) {
    if (!ok) failures.push_back(name);
  }
};

struct Config {
  std::string market;
  std::string utility = "exp:gamma=1,C=2";
  std::string endowment;
  std::vector<std::string> claims;
  double tol = 1e-9;
  std::uint64_t seed = 1;
  std::size_t workers = 0;
  std::string format = "text";
  std::string out_dir;
};

void csv_line(std::ostream& os, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) os << ',';
    const std::string& c = cells[i];
    if (c.find_first_of(",\"\n") != std::string::npos) {
      os << '"';
      for (char ch : c) os << (ch == '"' ? "\"\"" : std::string(1, ch));
      os << '"';
    } else {
      os << c;
    }
  }
  os << '\n';
}

void write_csv(std::ostream& os, const Table& t) {
  csv_line(os, t.columns);
  for (const auto& r : t.rows) csv_line(os, r);
}

ordered_json json_value(const std::string& s) {
  if (s == "yes") return true;
  if (s == "no") return false;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (!s.empty() && end == s.c_str() + s.size() && std::isfinite(v)) {
    if (s.find_first_of(".eE") == std::string::npos && s.size() < 16) return std::stoll(s);
    return v;
  }
  return s;
}

void emit(const Report& rep, const std::string& command, const Config& cfg,
          const ordered_json& manifest, std::ostream& out) {
  if (cfg.format == "json") {
    ordered_json j;
    j["command"] = command;
    ordered_json summary = ordered_json::object();
    for (const auto& [k, v] : rep.fields) summary[k] = json_value(v);
    j["summary"] = summary;
    ordered_json tables = ordered_json::object();
    for (const auto& t : rep.tables) {
      ordered_json rows = ordered_json::array();
      for (const auto& r : t.rows) {
        ordered_json row = ordered_json::object();
        for (std::size_t i = 0; i < t.columns.size(); ++i) row[t.columns[i]] = json_value(r[i]);
        rows.push_back(row);
      }
      tables[t.name] = rows;
    }
    j["tables"] = tables;
    j["failures"] = rep.failures;
    j["manifest"] = manifest;
    out << j.dump(2) << '\n';
  } else if (cfg.format == "csv") {
    out << "# manifest " << manifest.dump() << '\n';
    out << "# summary\n";
    csv_line(out, {"key", "value"});
    for (const auto& [k, v] : rep.fields) csv_line(out, {k, v});
    for (const auto& t : rep.tables) {
      out << "# " << t.name << '\n';
      write_csv(out, t);
    }
    for (const auto& f : rep.failures) out << "# FAILED " << f << '\n';
  } else {
    out << command << '\n';
    std::size_t w = 0;
    for (const auto& f : rep.fields) w = std::max(w, f.first.size());
    for (const auto& [k, v] : rep.fields) {
      out << "  " << k << std::string(w - k.size() + 2, ' ') << v << '\n';
    }
    for (const auto& t : rep.tables) {
      out << '\n' << '[' << t.name << "]\n";
      std::vector<std::size_t> widths(t.columns.size());
      for (std::size_t i = 0; i < t.columns.size(); ++i) widths[i] = t.columns[i].size();
      for (const auto& r : t.rows) {
        for (std::size_t i = 0; i < r.size(); ++i) widths[i] = std::max(widths[i], r[i].size());
      }
      auto line = [&](const std::vector<std::string>& cells) {
        out << ' ';
        for (std::size_t i = 0; i < cells.size(); ++i) {
          out << ' ' << cells[i] << std::string(widths[i] - cells[i].size(), ' ');
        }
        out << '\n';
      };
      line(t.columns);
      for (const auto& r : t.rows) line(r);
    }
    out << '\n';
    if (rep.failures.empty()) {
      out << "all checks passed\n";
    } else {
      for (const auto& f : rep.failures) out << "FAILED " << f << '\n';
    }
  }

  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    std::ofstream(fs::path(cfg.out_dir) / "manifest.json") << manifest.dump(2) << '\n';
    for (const auto& t : rep.tables) {
      std::ofstream f(fs::path(cfg.out_dir) / (command + "_" + t.name + ".csv"));
      write_csv(f, t);
    }
  }
}

Scenario load_input(const std::string& market) {
  if (market.empty()) throw Error(ErrorCode::InvalidArgument, "--market is required");
  if (fs::exists(market)) return load_scenario(market);
  if (is_builtin(market)) return builtin_scenario(market);
  throw Error(ErrorCode::InvalidArgument,
              "market '" + market + "' is neither a file nor a built-in market");
}

RandomVariable named_variable(const Scenario& sc, const std::string& name) {
  if (name.empty() || name == "endowment") return sc.endowment;
  if (name == "zero") return RandomVariable::Zero(static_cast<Eigen::Index>(sc.tree.num_leaves()));
  const auto it = sc.claims.find(name);
  if (it == sc.claims.end()) {
    throw Error(ErrorCode::InvalidArgument, "scenario has no claim named '" + name + "'");
  }
  return it->second;
}

RandomVariable require_claim(const Scenario& sc, const Config& cfg) {
  if (cfg.claims.empty()) throw Error(ErrorCode::InvalidArgument, "--claim is required");
  return named_variable(sc, cfg.claims.front());
}

void leaf_table(Report& rep, const MarketTree& tree, const DualSolution& s) {
  Table& t = rep.table("measure", {"leaf", "p", "mu", "q"});
  for (std::size_t l = 0; l < tree.num_leaves(); ++l) {
    const auto i = static_cast<Eigen::Index>(l);
    t.rows.push_back({tree.leaf_id(l), num(tree.leaf_probabilities()[i]), num(s.mu[i]), num(s.q[i])});
  }
}

void solve_fields(Report& rep, const DualSolution& s) {
  rep.add("value", s.value);
  rep.add("mass", s.mass);
  rep.add("support", std::string(to_string(s.support)));
  rep.add("newton_steps", s.newton_steps);
  rep.add("stationarity", s.stationarity);
  rep.add("complementarity", s.complementarity);
  rep.add("feasibility", s.feasibility);
}

DualOptions dual_options(const Config& cfg) {
  DualOptions o;
  o.tol = cfg.tol;
  return o;
}

Report cmd_solve(const Config& cfg) {
  const Scenario sc = load_input(cfg.market);
  const UtilityPair u = UtilityPair::parse(cfg.utility);
  const DualSolution s = solve_dual(sc.tree, u, named_variable(sc, cfg.endowment), dual_options(cfg));
  Report rep;
  rep.add("utility", u.describe());
  solve_fields(rep, s);
  leaf_table(rep, sc.tree, s);
  return rep;
}

Report cmd_recover(const Config& cfg) {
  const Scenario sc = load_input(cfg.market);
  const UtilityPair u = UtilityPair::parse(cfg.utility);
  const RandomVariable e = named_variable(sc, cfg.endowment);
  const DualSolution s = solve_dual(sc.tree, u, e, dual_options(cfg));
  const RandomVariable x = recover_terminal_wealth(sc.tree, u, e, s);
  const PrimalSolution ps = extract_strategy(sc.tree, u, e, s, x, kInf);
  Report rep;
  rep.add("dual_value", s.value);
  rep.add("primal_value", ps.value);
  rep.add("gap", std::abs(ps.value - s.value) / (1.0 + std::abs(s.value)));
  rep.add("replication_residual", ps.replication_residual);
  rep.add("first_order_residual", first_order_residual(sc.tree, u, e, s, x));
  rep.check("replication", ps.replication_residual <= 1e-8);

  std::vector<std::string> cols{"node", "t", "reached", "W"};
  for (const auto& a : sc.tree.assets()) cols.push_back("H_" + a);
  Table& t = rep.table("strategy", cols);
  for (std::size_t k = 0; k < sc.tree.num_nodes(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    std::vector<std::string> row{sc.tree.node(k).id, std::to_string(sc.tree.node(k).time),
                                 ps.reached[k] ? "yes" : "UNREACHED", num(ps.wealth[i])};
    for (Eigen::Index j = 0; j < ps.strategy.cols(); ++j) row.push_back(num(ps.strategy(i, j)));
    t.rows.push_back(row);
  }
  Table& leaves = rep.table("terminal", {"leaf", "X", "gains"});
  for (std::size_t l = 0; l < sc.tree.num_leaves(); ++l) {
    const auto i = static_cast<Eigen::Index>(l);
    leaves.rows.push_back({sc.tree.leaf_id(l), num(x[i]), num(ps.gains[i])});
  }
  return rep;
}

Report cmd_price(const Config& cfg, bool with_penalty) {
  const Scenario sc = load_input(cfg.market);
  const UtilityPair u = UtilityPair::parse(cfg.utility);
  const RandomVariable e = named_variable(sc, cfg.endowment);
  const DualContext ctx(sc.tree);
  if (cfg.claims.empty()) throw Error(ErrorCode::InvalidArgument, "--claim is required");
  Report rep;
  Table& tab = rep.table("price", {"claim", "bid", "offer", "certainty_equivalent", "davis",
                                   "lp_lower", "lp_upper", "penalty_bid", "agreement"});
  for (const auto& name : cfg.claims) {
    const PriceReport pr = price_report(ctx, u, e, named_variable(sc, name), with_penalty);
    tab.rows.push_back({name, num(pr.bid), num(pr.offer), num(pr.certainty_equivalent),
                        num(pr.davis), num(pr.lp_lower), num(pr.lp_upper), num(pr.penalty_bid),
                        num(pr.agreement)});
    if (cfg.claims.size() == 1) {
      rep.add("claim", name);
      rep.add("bid", pr.bid);
      rep.add("offer", pr.offer);
      rep.add("certainty_equivalent", pr.certainty_equivalent);
      rep.add("davis", pr.davis);
      rep.add("lp_lower", pr.lp_lower);
      rep.add("lp_upper", pr.lp_upper);
      if (with_penalty) {
        rep.add("penalty_bid", pr.penalty_bid);
        rep.add("agreement", pr.agreement);
      }
    }
    rep.check(name + ": lp_lower <= bid <= davis <= lp_upper", pr.range_ok());
    rep.check(name + ": bid <= offer", pr.bid_offer_ok());
    if (with_penalty) rep.check(name + ": penalty agreement", pr.agreement <= 1e-6);
  }
  return rep;
}

Report cmd_curve(const Config& cfg, const std::vector<double>& betas_in) {
  const Scenario sc = load_input(cfg.market);
  const UtilityPair u = UtilityPair::parse(cfg.utility);
  const RandomVariable e = named_variable(sc, cfg.endowment);
  const RandomVariable b = require_claim(sc, cfg);
  const DualContext ctx(sc.tree);
  const std::vector<double> betas = betas_in.empty() ? default_volume_grid() : betas_in;
  const VolumeCurve c = average_price_curve(ctx, u, e, b, betas, cfg.workers);
  Report rep;
  rep.add("claim", cfg.claims.front());
  rep.add("lp_lower", c.lp_lower);
  rep.add("davis", c.davis);
  rep.add("max_increase", c.max_increase);
  rep.add("non_increasing", c.non_increasing());
  rep.add("large_volume_gap", c.points.back().price - c.lp_lower);
  rep.add("small_volume_gap", c.points.front().price - c.davis);
  Table& t = rep.table("curve", {"beta", "price", "lp_lower", "davis"});
  for (const auto& p : c.points) t.rows.push_back({num(p.beta), num(p.price), num(c.lp_lower), num(c.davis)});
  rep.check("average price non-increasing in volume", c.non_increasing());
  return rep;
}

// Reads "node,value[,value...]" lines; a header line naming "node" is skipped.
StrategyProcess read_process(const MarketTree& tree, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open process file '" + path + "'");
  std::map<std::size_t, std::vector<double>> rows;
  std::string line;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    if (cell == "node") continue;
    const auto k = tree.find(cell);
    if (!k) throw Error(ErrorCode::ParseError, "process file names unknown node '" + cell + "'");
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(parse_decimal(cell));
    if (vals.empty() || (width && vals.size() != width)) {
      throw Error(ErrorCode::ParseError, "ragged process file at node '" + tree.node(*k).id + "'");
    }
    width = vals.size();
    rows[*k] = vals;
  }
  if (rows.size() != tree.num_nodes()) {
    throw Error(ErrorCode::ParseError, "process file must give a value at every node");
  }
  StrategyProcess s(static_cast<Eigen::Index>(tree.num_nodes()), static_cast<Eigen::Index>(width));
  for (const auto& [k, v] : rows) {
    for (std::size_t j = 0; j < width; ++j) {
      s(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = v[j];
    }
  }
  return s;
}

Report cmd_mubpp(const Config& cfg, const std::string& process, double drift) {
  const Scenario sc = load_input(cfg.market);
  const UtilityPair u = UtilityPair::parse(cfg.utility);
  const RandomVariable e = named_variable(sc, cfg.endowment);
  const DualContext ctx(sc.tree);
  StrategyProcess sp;
  if (!process.empty()) {
    sp = read_process(sc.tree, process);
  } else {
    const RandomVariable b = require_claim(sc, cfg);
    const DualSolution s = solve_dual(ctx, u, e);
    sp = conditional_process(sc.tree, b, s.q);
    for (std::size_t k = 0; k < sc.tree.num_nodes(); ++k) {
      sp(static_cast<Eigen::Index>(k), 0) += drift * sc.tree.node(k).time;
    }
  }
  const MubppReport r = check_mubpp(ctx, u, e, sp);
  Report rep;
  rep.add("drift_verdict", r.drift_verdict);
  rep.add("utility_verdict", r.utility_verdict);
  rep.add("is_mubpp", r.is_mubpp);
  rep.add("max_drift", r.max_drift);
  rep.add("u_base", r.u_base);
  rep.add("u_augmented", r.u_augmented);
  rep.add("augment_infeasible", r.augment_infeasible);
  if (!r.augment_note.empty()) rep.add("augment_note", r.augment_note);
  Table& t = rep.table("drift", {"node", "t", "price", "drift"});
  for (std::size_t k = 0; k < sc.tree.num_nodes(); ++k) {
    t.rows.push_back({sc.tree.node(k).id, std::to_string(sc.tree.node(k).time),
                      num(sp(static_cast<Eigen::Index>(k), 0)), num(r.drifts[k])});
  }
  rep.check("drift verdict matches utility verdict", r.agree());
  return rep;
}

Report cmd_sensitivity(const Config& cfg, const std::vector<std::string>& names,
                       const std::vector<double>& shifts) {
  const Scenario sc = load_input(cfg.market);
  const UtilityPair u = UtilityPair::parse(cfg.utility);
  const DualContext ctx(sc.tree);
  const RandomVariable base = named_variable(sc, cfg.endowment);
  std::vector<RandomVariable> endows;
  std::vector<std::string> labels;
  for (double c : shifts) {
    endows.push_back((base.array() + c).matrix());
    labels.push_back("E+" + num(c));
  }
  for (const auto& n : names) {
    endows.push_back(named_variable(sc, n));
    labels.push_back(n);
  }
  SensitivityOptions opts;
  opts.tol = cfg.tol;
  for (const auto& c : cfg.claims) opts.claims.push_back(named_variable(sc, c));
  const SensitivityReport r = endowment_sensitivity(ctx, u, endows, opts);
  Report rep;
  rep.add("certificates", r.checks.size());
  rep.add("passed", r.ok());
  Table& v = rep.table("values", {"index", "endowment", "value"});
  for (std::size_t i = 0; i < r.values.size(); ++i) {
    v.rows.push_back({std::to_string(i), labels[i], num(r.values[i])});
  }
  Table& t = rep.table("certificates", {"name", "margin", "tolerance", "passed"});
  for (const auto& c : r.checks) {
    t.rows.push_back({c.name, num(c.margin), num(c.tolerance), yes(c.passed())});
    rep.check(c.name, c.passed());
  }
  return rep;
}

struct Battery {
  Table* table;
  Report* rep;
  void add(const std::string& name, double value, double tol, bool ok) {
    table->rows.push_back({name, num(value), num(tol), yes(ok)});
    rep->check(name, ok);
  }
  void bound(const std::string& name, double value, double tol) { add(name, value, tol, value <= tol); }
};

Report cmd_verify(const Config& cfg, double corrupt, std::size_t cap, std::size_t samples) {
  const Scenario sc = load_input(cfg.market);
  const MarketTree& tree = sc.tree;
  const UtilityPair u = UtilityPair::parse(cfg.utility);
  const RandomVariable e = named_variable(sc, cfg.endowment);
  const DualContext ctx(tree);
  DualSolution s = solve_dual(ctx, u, e, dual_options(cfg));
  if (corrupt != 0.0) {
    s.mu[0] *= 1.0 + corrupt;
    s.mass = s.mu.sum();
    s.q = s.mu / s.mass;
    s.value = dual_objective(tree, u, e, s.mu);
    s.feasibility = ctx.geometry().constraints.violation(s.mu);
  }
  Report rep;
  rep.add("value", s.value);
  rep.add("mass", s.mass);
  rep.add("support", std::string(to_string(s.support)));
  if (corrupt != 0.0) rep.add("corrupted_by", corrupt);
  Table& t = rep.table("checks", {"check", "value", "tolerance", "passed"});
  Battery b{&t, &rep};

  b.bound("martingale_feasibility", s.feasibility, 1e-9);
  b.bound("stationarity", s.stationarity, cfg.tol);
  bool exhaustive = false;
  const auto verts = vertices_or_samples(ctx.geometry().constraints, cap, samples, cfg.seed, &exhaustive);
  rep.add("vertices", verts.size());
  rep.add("vertices_exhaustive", exhaustive);
  const SupportReport sup = check_maximal_support(tree, u, s, verts);
  b.add("maximal_support", static_cast<double>(sup.violations.size()), 0.0, sup.ok());

  if (s.support != SupportFlag::Equivalent) {
    bool refused = false;
    try {
      (void)recover_terminal_wealth(tree, u, e, s);
    } catch (const Error& err) {
      refused = err.code() == ErrorCode::NoPrimalOptimizer;
    }
    b.add("degenerate_support_refuses_recovery", refused ? 1.0 : 0.0, 0.0, refused);
    return rep;
  }

  const RandomVariable x = recover_terminal_wealth(tree, u, e, s);
  const PrimalSolution ps = extract_strategy(tree, u, e, s, x, kInf);
  const double scale = 1.0 + std::abs(s.value);
  b.bound("first_order_condition", first_order_residual(tree, u, e, s, x), 1e-8);
  b.bound("replication", ps.replication_residual, 1e-8);
  b.bound("duality_gap", std::abs(ps.value - s.value) / scale, 1e-7);

  const SupermartingaleReport sm = verify_supermartingale(tree, ps.wealth, verts, u, s.q);
  b.bound("supermartingale_drift", sm.max_drift / (1.0 + ps.wealth.cwiseAbs().maxCoeff()), 1e-8);
  b.bound("optimal_measure_martingale", sm.martingale_drift / (1.0 + ps.wealth.cwiseAbs().maxCoeff()),
          1e-8);

  double dyn = 0.0;
  for (int tt = 0; tt <= tree.horizon(); ++tt) {
    for (const auto& n : dynamic_dual(tree, u, e, s, ps.wealth, tt, cfg.workers)) {
      dyn = std::max(dyn, n.residual);
    }
  }
  b.bound("dynamic_dual", dyn, 1e-7);

  if (u.family() == UtilityPair::Family::Exponential) {
    const SnellReport sn = snell_envelope_exponential(tree, u, e, s, ps.wealth, verts);
    b.bound("snell_equality", sn.max_equality_gap, 1e-5);
    b.bound("snell_lower_bound", sn.max_excess, 1e-7);
  }
  return rep;
}

Report cmd_oracle(const Config& cfg, const std::string& mode, double resolution,
                  std::size_t samples, int starts, bool refine, double gap_tol) {
  const Scenario sc = load_input(cfg.market);
  const UtilityPair u = UtilityPair::parse(cfg.utility);
  OracleOptions o;
  o.tol = kInf;
  o.dual.mode = mode == "grid" ? OracleMode::Grid : mode == "sample" ? OracleMode::Sample : OracleMode::Auto;
  o.dual.resolution = resolution;
  o.dual.samples = samples;
  o.dual.refine = refine;
  o.dual.seed = cfg.seed;
  o.dual.workers = cfg.workers;
  o.primal.starts = starts;
  o.primal.seed = cfg.seed;
  const OracleReport r = check_duality_gap(sc.tree, u, named_variable(sc, cfg.endowment), o);
  Report rep;
  rep.add("regime", to_string(r.regime));
  rep.add("solver_dual", r.solver_dual);
  rep.add("solver_primal", r.solver_primal);
  rep.add("brute_dual", r.brute_dual);
  rep.add("brute_primal", r.brute_primal);
  rep.add("gap_solver", r.gap_solver);
  rep.add("gap_dual", r.gap_dual);
  rep.add("gap_primal", r.gap_primal);
  rep.add("weak_duality", r.weak_duality);
  rep.add("worst", r.worst);
  rep.add("resolution", r.resolution);
  rep.add("dual_points", r.dual_points);
  rep.add("dual_dimension", r.dual_dimension);
  rep.add("primal_starts", r.primal_starts);
  rep.add("primal_dimension", r.primal_dimension);
  if (!r.note.empty()) rep.add("note", r.note);
  rep.check("oracle gap within " + num(gap_tol), r.worst <= gap_tol);
  return rep;
}

Report cmd_geometry(const Config& cfg, std::size_t cap, std::size_t samples) {
  const Scenario sc = load_input(cfg.market);
  const MarketTree& tree = sc.tree;
  const MartingaleConstraints mc = build_constraints(tree);
  Report rep;
  std::vector<std::string> cols{"node", "asset"};
  for (std::size_t l = 0; l < tree.num_leaves(); ++l) cols.push_back(tree.leaf_id(l));
  Table& a = rep.table("constraints", cols);
  for (Eigen::Index r = 0; r < mc.rows.rows(); ++r) {
    const auto [node, asset] = mc.labels[static_cast<std::size_t>(r)];
    std::vector<std::string> row{tree.node(node).id, tree.assets()[asset]};
    for (Eigen::Index l = 0; l < mc.rows.cols(); ++l) row.push_back(num(mc.rows(r, l)));
    a.rows.push_back(row);
  }
  std::optional<MarketGeometry> geo;
  try {
    geo = analyze_market(tree);
  } catch (const Error& err) {
    if (err.code() != ErrorCode::NoMartingaleMeasure) throw;
  }
  if (!geo) {
    rep.add("verdict", std::string("NO_MM"));
    rep.add("martingale_measures", false);
    return rep;
  }
  rep.add("verdict", std::string(geo->equivalent ? "EQUIVALENT" : "DEGENERATE"));
  rep.add("martingale_measures", true);
  rep.add("equivalent_measure", geo->equivalent);
  rep.add("support_size", geo->support_size());
  rep.add("interior_min", geo->interior_min);
  bool exhaustive = false;
  const auto verts = vertices_or_samples(mc, cap, samples, cfg.seed, &exhaustive);
  rep.add("vertices", verts.size());
  rep.add("vertices_exhaustive", exhaustive);
  std::vector<std::string> vc{"vertex"};
  for (std::size_t l = 0; l < tree.num_leaves(); ++l) vc.push_back(tree.leaf_id(l));
  Table& v = rep.table("vertices", vc);
  for (std::size_t i = 0; i < verts.size(); ++i) {
    std::vector<std::string> row{std::to_string(i)};
    for (Eigen::Index l = 0; l < verts[i].size(); ++l) row.push_back(num(verts[i][l]));
    v.rows.push_back(row);
  }
  return rep;
}

Report cmd_certify(const Config& cfg) {
  const UtilityPair u = UtilityPair::parse(cfg.utility);
  const CertificationReport c = inspect_assumptions(u);
  Report rep;
  rep.add("utility", u.describe());
  rep.add("increasing", c.increasing);
  rep.add("concave", c.concave);
  rep.add("inada", c.inada);
  rep.add("normalized", c.normalized);
  rep.add("rae", c.rae);
  rep.add("growth", c.growth);
  rep.add("conjugacy", c.conjugacy);
  rep.add("ae_minus_estimate", c.ae_minus_estimate);
  rep.add("ae_plus_estimate", c.ae_plus_estimate);
  rep.add("growth_constant", c.growth_constant);
  rep.add("conjugacy_residual", c.conjugacy_residual);
  rep.add("biconjugacy_abs", c.biconjugacy_abs);
  rep.add("fenchel_gap", c.fenchel_gap);
  rep.add("inversion_residual", c.inversion_residual);
  for (const auto& v : c.violations) rep.failures.push_back(v);
  return rep;
}

ordered_json make_manifest(const std::string& command, const Config& cfg,
                           const std::vector<std::string>& args) {
  ordered_json m;
  m["tool"] = "dualprice";
  m["version"] = DUALPRICE_VERSION_STRING;
  m["command"] = command;
  m["args"] = args;
  m["market"] = cfg.market;
  m["utility"] = cfg.utility;
  m["endowment"] = cfg.endowment.empty() ? "endowment" : cfg.endowment;
  m["claims"] = cfg.claims;
  m["tol"] = cfg.tol;
  m["seed"] = cfg.seed;
  m["workers"] = cfg.workers;
  m["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
               "." + std::to_string(EIGEN_MINOR_VERSION);
#ifdef __VERSION__
  m["compiler"] = __VERSION__;
#endif
  return m;
}

bool is_input_error(ErrorCode c) {
  switch (c) {
    case ErrorCode::ParseError:
    case ErrorCode::InvalidTree:
    case ErrorCode::InvalidArgument:
    case ErrorCode::Domain:
    case ErrorCode::Dimension:
      return true;
    default:
      return false;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Utility maximization and indifference pricing on finite scenario trees", "dualprice"};
  app.require_subcommand(1);
  Config cfg;

  auto common = [&](CLI::App* sub, bool market = true) {
    if (market) {
      sub->add_option("--market", cfg.market, "Scenario file or built-in market name")->required();
      sub->add_option("--endowment", cfg.endowment,
                      "Endowment: 'endowment' (scenario default), 'zero', or a claim name");
    }
    sub->add_option("--utility", cfg.utility, "exp:gamma=G,C=C or twopower:a=A,b=B,C=C");
    sub->add_option("--tol", cfg.tol, "Solver stationarity tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--seed", cfg.seed, "Seed for sampled vertices and oracle starts");
    sub->add_option("--workers", cfg.workers, "Worker threads (default: DUALPRICE_WORKERS)");
    sub->add_option("--format", cfg.format, "text | csv | json")
        ->check(CLI::IsMember({"text", "csv", "json"}));
    sub->add_option("--out-dir", cfg.out_dir, "Also write manifest.json and CSV tables here");
  };

  auto* solve = app.add_subcommand("solve", "Solve the dual problem");
  common(solve);
  auto* recover = app.add_subcommand("recover", "Recover wealth and holdings per node");
  common(recover);

  bool no_penalty = false;
  auto* price = app.add_subcommand("price", "Indifference bid/offer, Davis price and bounds");
  common(price);
  price->add_option("--claim", cfg.claims, "Claim name (repeatable)")->required();
  price->add_flag("--no-penalty", no_penalty, "Skip the entropic-penalty cross-check");

  std::vector<double> betas;
  auto* curve = app.add_subcommand("curve", "Average price p(beta B)/beta over volumes");
  common(curve);
  curve->add_option("--claim", cfg.claims, "Claim name")->required();
  curve->add_option("--betas", betas, "Volumes (default 1e-4 ... 1e4, three per decade)");

  std::string process;
  double drift = 0.0;
  auto* mubpp = app.add_subcommand("mubpp", "Test a price process against the optimal measure");
  common(mubpp);
  mubpp->add_option("--claim", cfg.claims, "Claim whose conditional expectation is the candidate");
  mubpp->add_option("--drift", drift, "Drift per period added to the candidate");
  mubpp->add_option("--process", process, "CSV with node,value rows (overrides --claim)");

  std::vector<std::string> endow_names;
  std::vector<double> shifts{0.0, 0.1};
  auto* sens = app.add_subcommand("sensitivity", "Certificates for u as a function of the endowment");
  common(sens);
  sens->add_option("--endowments", endow_names, "Extra endowments by claim name");
  sens->add_option("--shifts", shifts, "Constant shifts of the base endowment");
  sens->add_option("--claim", cfg.claims, "Claims for the sandwich and price-continuity checks");

  double corrupt = 0.0;
  std::size_t cap = 10000, samples = 200;
  auto* verify = app.add_subcommand("verify", "Run the full invariant battery");
  common(verify);
  verify->add_option("--corrupt-dual", corrupt, "Test hook: scale the first leaf of mu by 1 + x");
  verify->add_option("--vertex-cap", cap, "Vertex enumeration cap");
  verify->add_option("--vertex-samples", samples, "Sampled vertices when the cap is hit");

  std::string mode = "auto";
  double resolution = 0.02, gap_tol = 1e-5;
  std::size_t oracle_samples = 2000;
  int starts = 32;
  bool no_refine = false;
  auto* oracle = app.add_subcommand("oracle", "Brute-force duality-gap check");
  common(oracle);
  oracle->add_option("--mode", mode, "auto | grid | sample")->check(CLI::IsMember({"auto", "grid", "sample"}));
  oracle->add_option("--resolution", resolution, "Grid step")->check(CLI::PositiveNumber);
  oracle->add_option("--samples", oracle_samples, "Points in sample mode");
  oracle->add_option("--starts", starts, "Primal multi-start count");
  oracle->add_flag("--no-refine", no_refine, "Skip compass refinement");
  oracle->add_option("--gap-tol", gap_tol, "Largest accepted relative gap");

  auto* geometry = app.add_subcommand("geometry", "Martingale constraints, feasibility and vertices");
  common(geometry);
  geometry->add_option("--vertex-cap", cap, "Vertex enumeration cap");
  geometry->add_option("--vertex-samples", samples, "Sampled vertices when the cap is hit");

  auto* certify = app.add_subcommand("certify", "Check the standing assumptions on a utility");
  common(certify, false);

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  if (cfg.workers == 0) cfg.workers = default_workers();

  std::string command;
  for (auto* sub : app.get_subcommands()) command = sub->get_name();
  try {
    Report rep;
    if (*solve) rep = cmd_solve(cfg);
    else if (*recover) rep = cmd_recover(cfg);
    else if (*price) rep = cmd_price(cfg, !no_penalty);
    else if (*curve) rep = cmd_curve(cfg, betas);
    else if (*mubpp) rep = cmd_mubpp(cfg, process, drift);
    else if (*sens) rep = cmd_sensitivity(cfg, endow_names, shifts);
    else if (*verify) rep = cmd_verify(cfg, corrupt, cap, samples);
    else if (*oracle) rep = cmd_oracle(cfg, mode, resolution, oracle_samples, starts, !no_refine, gap_tol);
    else if (*geometry) rep = cmd_geometry(cfg, cap, samples);
    else if (*certify) rep = cmd_certify(cfg);
    emit(rep, command, cfg, make_manifest(command, cfg, args), out);
    return rep.failures.empty() ? 0 : 1;
  } catch (const Error& e) {
    err << "dualprice " << command << ": " << e.what() << '\n';
    return is_input_error(e.code()) ? 2 : 1;
  } catch (const std::exception& e) {
    err << "dualprice " << command << ": " << e.what() << '\n';
    return 2;
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace dualprice::cli
