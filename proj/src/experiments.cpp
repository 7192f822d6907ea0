#include "cgff/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "cgff/cable.hpp"
#include "cgff/gff.hpp"
#include "cgff/greens.hpp"
#include "cgff/iso.hpp"
#include "cgff/parallel.hpp"
#include "cgff/perc.hpp"
#include "cgff/renorm.hpp"

namespace cgff {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

std::string num(int64_t x) { return std::to_string(x); }
std::string num(uint64_t x) { return std::to_string(x); }
std::string num(int x) { return std::to_string(x); }

// Sub-experiment seeds derived from the configured seed and a tag.
uint64_t derive_seed(uint64_t seed, const std::string& tag) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : tag) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  uint64_t z = seed ^ h;
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

void add_check(ExperimentResult& r, const std::string& name, bool pass, const std::string& detail) {
  r.checks.push_back({name, pass, detail});
}

std::string z_detail(double z) { return "z = " + num(z); }

CrossingOptions crossing_options(const ExperimentConfig& c) {
  CrossingOptions o;
  o.buffer_fraction = c.buffer_fraction;
  o.slab_thickness = c.slab_thickness;
  o.truncation_K = c.truncation_K;
  o.threads = c.threads;
  return o;
}

Table crossing_table(const std::string& name, const CrossingTable& t) {
  Table tab{name, {"mode", "L", "h", "events", "trials", "rate", "ci_lo", "ci_hi", "replicas", "seed"}, {}};
  for (const auto& row : t.rows) {
    tab.rows.push_back({to_string(row.mode), num(row.L), num(row.h), num(row.crossing.events),
                        num(row.crossing.trials), num(row.crossing.rate), num(row.crossing.ci.lo),
                        num(row.crossing.ci.hi), num(row.crossing.trials), num(t.seed)});
  }
  return tab;
}

void dump_field(ExperimentResult& r, const std::string& out_dir, int d, int64_t L, uint64_t seed) {
  if (out_dir.empty()) return;
  fs::create_directories(fs::path(out_dir) / "fields");
  Stream rng(seed, 0);
  const VertexField f = sample_gff(make_box(d, std::vector<int64_t>(static_cast<size_t>(d), L)), rng);
  const std::string rel = "fields/gff_L" + std::to_string(L) + ".gff";
  save_field(f, (fs::path(out_dir) / rel).string());
  r.field_dumps.push_back(rel);
}

// ------------------------------------------------------------------ kinds

void run_verify_iso(const ExperimentConfig& c, ExperimentResult& r) {
  json seeds = json::object();
  for (double u : c.u) {
    const std::string tag = "u=" + num(u);
    IsoMomentOptions mo;
    mo.threads = c.threads;
    const uint64_t ms = derive_seed(c.seed, "moments " + tag);
    const MomentComparison m = verify_iso_moments(c.d, u, c.replicas, ms, mo);
    const double rhs_mean_z = (m.rhs.mean() - m.expected_mean) / m.rhs.std_error();
    const double lhs_var_z = (m.lhs_var - m.expected_variance) / m.lhs_var_se;
    const double rhs_var_z = (m.rhs_var - m.expected_variance) / m.rhs_var_se;
    r.estimates.push_back(mean_estimate("mean ell+gamma^2/2 " + tag, m.lhs.mean(), m.lhs.std_error(),
                                        m.lhs.count(), ms));
    r.estimates.push_back(mean_estimate("mean (phi+sqrt(2u))^2/2 " + tag, m.rhs.mean(), m.rhs.std_error(),
                                        m.rhs.count(), ms));
    r.estimates.push_back(mean_estimate("variance lhs " + tag, m.lhs_var, m.lhs_var_se, m.lhs.count(), ms));
    r.estimates.push_back(mean_estimate("variance rhs " + tag, m.rhs_var, m.rhs_var_se, m.rhs.count(), ms));
    add_check(r, "lhs mean = u + g(0)/2 " + tag, std::abs(m.lhs_mean_z) <= 3.0, z_detail(m.lhs_mean_z));
    add_check(r, "rhs mean = u + g(0)/2 " + tag, std::abs(rhs_mean_z) <= 3.0, z_detail(rhs_mean_z));
    add_check(r, "lhs mean = rhs mean " + tag, std::abs(m.mean_z) <= 3.0, z_detail(m.mean_z));
    add_check(r, "lhs variance " + tag, std::abs(lhs_var_z) <= 3.0, z_detail(lhs_var_z));
    add_check(r, "rhs variance " + tag, std::abs(rhs_var_z) <= 3.0, z_detail(rhs_var_z));
    add_check(r, "lhs variance = rhs variance " + tag, std::abs(m.var_z) <= 3.0, z_detail(m.var_z));
    add_check(r, "KS lhs vs rhs " + tag, m.ks.p_value >= 0.01, "p = " + num(m.ks.p_value));

    const int sr_reps = std::max(200, c.replicas / 50);
    const uint64_t ss = derive_seed(c.seed, "sign rule " + tag);
    const SignRuleCheck sr = sign_rule_marginal(c.d, u, c.window, sr_reps, ss, c.halo_factor, c.threads);
    r.estimates.push_back(mean_estimate("sign rule centre variance " + tag, sr.variance, sr.variance_se,
                                        sr.phi.count(), ss));
    add_check(r, "phi > -sqrt(2u) on the occupied set " + tag, sr.occupied_violations == 0,
              num(sr.occupied_violations) + " of " + num(sr.occupied_vertices) + " occupied vertices violate");
    add_check(r, "sign rule marginal KS against N(0, g(0)) " + tag, sr.ks.p_value >= 0.01,
              "p = " + num(sr.ks.p_value));
    add_check(r, "sign rule identity " + tag, sr.max_identity_error <= 1e-9,
              "max error " + num(sr.max_identity_error));
    r.summary[tag] = {{"expected_mean", m.expected_mean},
                      {"expected_variance", m.expected_variance},
                      {"lhs_mean", m.lhs.mean()},
                      {"rhs_mean", m.rhs.mean()},
                      {"lhs_variance", m.lhs_var},
                      {"rhs_variance", m.rhs_var},
                      {"ks_statistic", m.ks.statistic},
                      {"ks_p", m.ks.p_value},
                      {"sign_rule_replicas", sr_reps},
                      {"sign_rule_ks_p", sr.ks.p_value},
                      {"occupied_vertices", sr.occupied_vertices}};
    seeds["moments " + tag] = ms;
    seeds["sign rule " + tag] = ss;
  }
  r.summary["seeds"] = seeds;
}

void run_estimate_hstar(const ExperimentConfig& c, ExperimentResult& r, const std::string& out_dir) {
  const PercMode mode = parse_mode(c.mode);
  const CrossingTable t = crossing_curve(c.d, c.L, c.h, c.replicas, mode, c.seed, crossing_options(c));
  r.tables.push_back(crossing_table("crossing", t));
  const uint64_t bs = derive_seed(c.seed, "bootstrap");
  const HstarEstimate est = estimate_hstar(t, c.bootstrap, bs);
  json s;
  s["mode"] = c.mode;
  s["bootstrap_seed"] = bs;
  s["indeterminate"] = est.indeterminate;
  s["pair_estimates"] = est.pair_estimates;
  s["ci_coverage"] = est.ci_coverage;
  if (est.hstar) {
    const double pc = estimate_pc(*est.hstar, c.d);
    r.estimates.push_back({"hstar", *est.hstar, est.ci.lo, est.ci.hi, c.replicas, c.seed});
    r.estimates.push_back({"pc", pc, estimate_pc(est.ci.hi, c.d), estimate_pc(est.ci.lo, c.d), c.replicas, c.seed});
    s["hstar"] = *est.hstar;
    s["ci"] = {est.ci.lo, est.ci.hi};
    s["pc"] = pc;
    add_check(r, "hstar > 0 with 95% CI excluding 0", *est.hstar > 0.0 && est.ci.lo > 0.0,
              "hstar = " + num(*est.hstar) + ", CI [" + num(est.ci.lo) + ", " + num(est.ci.hi) + "]");
    add_check(r, "pc < 1/2", pc < 0.5, "pc = " + num(pc));
  } else {
    s["hstar"] = nullptr;
    add_check(r, "hstar > 0 with 95% CI excluding 0", false, "curves do not cross on the grid");
  }
  r.summary = s;
  r.summary["seeds"] = {{"crossing", c.seed}, {"bootstrap", bs}};
  dump_field(r, out_dir, c.d, c.L.back(), derive_seed(c.seed, "field dump"));
}

struct Trend {
  double z = 0.0;
  bool monotone = true;
};

Trend trend(const CrossingTable& t, size_t hi, bool increasing) {
  Trend tr;
  const size_t n = t.L.size();
  for (size_t li = 1; li < n; ++li) {
    const double step = t.at(li, hi).crossing.rate - t.at(li - 1, hi).crossing.rate;
    tr.monotone = tr.monotone && (increasing ? step >= 0.0 : step <= 0.0);
  }
  const auto& a = t.at(0, hi).crossing;
  const auto& b = t.at(n - 1, hi).crossing;
  const double var = a.rate * (1 - a.rate) / double(a.trials) + b.rate * (1 - b.rate) / double(b.trials);
  tr.z = var > 0.0 ? (b.rate - a.rate) / std::sqrt(var) : 0.0;
  return tr;
}

void run_cable_contrast(const ExperimentConfig& c, ExperimentResult& r, const std::string& out_dir) {
  const uint64_t ls = derive_seed(c.seed, "lattice"), cs = derive_seed(c.seed, "cable");
  const CrossingTable lat = crossing_curve(c.d, c.L, c.h, c.replicas, PercMode::lattice, ls, crossing_options(c));
  const CrossingTable cab = crossing_curve(c.d, c.L, c.h, c.replicas, PercMode::cable, cs, crossing_options(c));
  r.tables.push_back(crossing_table("lattice", lat));
  r.tables.push_back(crossing_table("cable", cab));
  json trends = json::array();
  for (size_t hi = 0; hi < c.h.size(); ++hi) {
    const Trend tl = trend(lat, hi, true), tc = trend(cab, hi, false);
    const std::string tag = " at h=" + num(c.h[hi]);
    add_check(r, "lattice spanning increases in L" + tag, tl.monotone && tl.z >= 3.0,
              "monotone " + std::string(tl.monotone ? "yes" : "no") + ", " + z_detail(tl.z));
    add_check(r, "cable spanning decreases in L" + tag, tc.monotone && tc.z <= -3.0,
              "monotone " + std::string(tc.monotone ? "yes" : "no") + ", " + z_detail(tc.z));
    trends.push_back({{"h", c.h[hi]}, {"lattice_z", tl.z}, {"cable_z", tc.z}});
    for (size_t li = 0; li < c.L.size(); ++li) {
      r.estimates.push_back(rate_estimate("lattice L=" + num(c.L[li]) + tag, lat.at(li, hi).crossing, ls));
      r.estimates.push_back(rate_estimate("cable L=" + num(c.L[li]) + tag, cab.at(li, hi).crossing, cs));
    }
  }
  r.summary["trends"] = trends;
  r.summary["seeds"] = {{"lattice", ls}, {"cable", cs}};
  dump_field(r, out_dir, c.d, c.L.back(), derive_seed(c.seed, "field dump"));
}

void run_flip(const ExperimentConfig& c, ExperimentResult& r) {
  const FlipReport rep = flip_experiment(c.d, c.h, c.boundaries, c.inner, c.seed, c.threads, c.constants);
  Table tab{"boundaries",
            {"h", "K", "boundary", "beta", "p_G", "p_E_above", "diff", "diff_se", "exact_G", "exact_E_above",
             "estimate_holds", "exact_holds", "replicas", "seed"},
            {}};
  json levels = json::array();
  for (const auto& lv : rep.levels) {
    for (size_t i = 0; i < lv.boundaries.size(); ++i) {
      const auto& b = lv.boundaries[i];
      tab.rows.push_back({num(lv.h), num(lv.K), num(uint64_t(i)), num(b.beta), num(b.p_G), num(b.p_E), num(b.diff),
                          num(b.diff_se), num(b.exact_G), num(b.exact_E), b.estimate_holds ? "1" : "0",
                          b.exact_holds ? "1" : "0", num(c.inner), num(c.seed)});
    }
    levels.push_back({{"h", lv.h}, {"K", lv.K}, {"all_hold", lv.all_hold}, {"exact_violations", lv.exact_violations},
                      {"worst_z", lv.worst_z}});
  }
  r.tables.push_back(tab);
  const auto smallest = std::min_element(rep.levels.begin(), rep.levels.end(),
                                         [](const auto& a, const auto& b) { return a.h < b.h; });
  add_check(r, "P(G) <= P(E, phi >= h) within 3 se at h=" + num(smallest->h), smallest->all_hold,
            "worst z = " + num(smallest->worst_z));
  add_check(r, "closed-form P(G) <= P(E, phi >= h) on every boundary at h=" + num(smallest->h),
            smallest->exact_violations == 0, num(smallest->exact_violations) + " of " + num(c.boundaries) + " violate");
  const uint64_t cs = derive_seed(c.seed, "composition");
  json comp = json::array();
  for (double bv : {std::nan(""), 0.0}) {
    const CompositionCheck cc =
        flip_composition_check(c.d, smallest->h, bv, std::max(c.inner, 20000), cs, c.constants);
    const std::string where = std::isnan(bv) ? "K(h)" : num(bv);
    r.estimates.push_back(mean_estimate("G frequency, boundary at " + where, cc.estimate, cc.se, cc.replicas, cs));
    add_check(r, "closed-form composition at boundary " + where, std::abs(cc.z) <= 3.0,
              "exact " + num(cc.exact) + ", simulated " + num(cc.estimate) + ", " + z_detail(cc.z));
    comp.push_back({{"h", cc.h}, {"K", cc.K}, {"boundary", cc.boundary}, {"exact", cc.exact},
                    {"estimate", cc.estimate}, {"se", cc.se}, {"z", cc.z}});
  }
  r.summary["levels"] = levels;
  r.summary["h1"] = rep.h1 ? json(*rep.h1) : json(nullptr);
  r.summary["composition"] = comp;
  r.summary["seeds"] = {{"boundaries", c.seed}, {"composition", cs}};
}

void run_renorm_cert(const ExperimentConfig& c, ExperimentResult& r) {
  DecayOptions o;
  o.kind = parse_seed_kind(c.seed_kind);
  o.d = c.d;
  o.q = c.q;
  o.K = c.K;
  o.L0 = c.L0;
  o.l0 = c.l0;
  o.ld = c.ld;
  o.n_max = c.n_max;
  o.replicas = c.replicas;
  o.seed = c.seed;
  o.threads = c.threads;
  const DecayReport rep = renorm_decay_experiment(o);
  Table tab{"decay", {"n", "p_hat", "se", "ci_lo", "ci_hi", "exact", "z", "replicas", "seed"}, {}};
  json rows = json::array();
  for (const auto& row : rep.rows) {
    tab.rows.push_back({num(row.n), num(row.p_hat), num(row.se), num(row.ci.lo), num(row.ci.hi),
                        row.exact ? num(*row.exact) : "", row.exact ? num(row.z) : "", num(c.replicas), num(c.seed)});
    r.estimates.push_back({"P(level " + num(row.n) + " bad)", row.p_hat, row.ci.lo, row.ci.hi, c.replicas, c.seed});
    if (row.exact) {
      add_check(r, "level " + num(row.n) + " matches the exact i.i.d. recursion", std::abs(row.z) <= 3.0,
                z_detail(row.z));
    }
    rows.push_back({{"n", row.n}, {"p_hat", row.p_hat}, {"se", row.se}});
  }
  r.tables.push_back(tab);
  add_check(r, "bad-event probability strictly decreasing in n", rep.strictly_decreasing, "");

  const ScaleSystem cs = build_scales(c.cascade_d, 1, 1);
  const uint64_t cseed = derive_seed(c.seed, "cascade");
  int witnesses = 0, agree = 0, counter = 0, refused = 0;
  Table ctab{"cascade", {"instance", "status", "x0", "family", "path_length", "confirmed", "seed"}, {}};
  for (int i = 0; i < c.cascade_instances; ++i) {
    Stream rng(cseed, uint64_t(i));
    const CoarseConfig bad0 = random_bad_path(cs, 1, 100, rng);
    const CascadeResult res = cascade_witness(bad0, cs, 1, Point{});
    std::string status = "refused";
    bool confirmed = false;
    std::string x0;
    if (res.status == CascadeResult::Status::witness) {
      status = "witness";
      ++witnesses;
      const auto lv = eval_levels(bad0, cs, 1);
      const auto it = lv[1].bad.find(res.x0);
      confirmed = it != lv[1].bad.end() && ((it->second >> res.family) & 1);
      agree += confirmed;
      for (int a = 0; a < cs.d; ++a) x0 += (a ? " " : "") + num(res.x0[size_t(a)]);
    } else if (res.status == CascadeResult::Status::counterexample) {
      status = "counterexample";
      ++counter;
    } else {
      ++refused;
    }
    ctab.rows.push_back({num(i), status, x0, res.status == CascadeResult::Status::witness ? family_name(res.family) : "",
                         num(res.path_length), confirmed ? "1" : "0", num(cseed)});
  }
  r.tables.push_back(ctab);
  add_check(r, "cascade witnesses confirmed by the recursive evaluation", witnesses > 0 && agree == witnesses,
            num(agree) + " of " + num(witnesses) + " witnesses confirmed, " + num(counter) + " counterexamples, " +
                num(refused) + " refused");
  r.summary["scales"] = rep.scales.describe();
  r.summary["reference_scales"] = rep.reference_scales.describe();
  r.summary["cascade_scales"] = cs.describe();
  r.summary["rows"] = rows;
  r.summary["strictly_decreasing"] = rep.strictly_decreasing;
  r.summary["loglog_slope"] = rep.loglog_slope ? json(*rep.loglog_slope) : json(nullptr);
  r.summary["cascade"] = {{"instances", c.cascade_instances}, {"witnesses", witnesses}, {"confirmed", agree},
                          {"counterexamples", counter}, {"refused", refused}};
  r.summary["seeds"] = {{"decay", c.seed}, {"cascade", cseed}};
}

void run_decouple(const ExperimentConfig& c, ExperimentResult& r) {
  std::vector<DecoupleKind> kinds;
  if (c.decouple_kind == "both") {
    kinds = {DecoupleKind::interlacement, DecoupleKind::gff};
  } else {
    kinds = {parse_decouple_kind(c.decouple_kind)};
  }
  Table tab{"pairs",
            {"kind", "event", "lhs", "lhs_se", "rhs", "rhs_se", "diff_se", "slack", "z", "monotonicity_violations",
             "pass", "replicas", "seed"},
            {}};
  json seeds = json::object();
  for (DecoupleKind k : kinds) {
    DecouplingOptions o;
    o.d = c.d;
    o.r = c.r;
    o.s = c.s;
    o.eps = c.eps.front();
    o.u = c.u.front();
    o.replicas = c.replicas;
    o.pilot_replicas = c.pilot;
    o.seed = derive_seed(c.seed, to_string(k));
    o.threads = c.threads;
    o.halo_factor = c.halo_factor;
    seeds[to_string(k)] = o.seed;
    const DecouplingReport rep = decoupling_test(k, default_events(k), o);
    for (const auto& row : rep.rows) {
      tab.rows.push_back({to_string(k), row.event.name, num(row.lhs), num(row.lhs_se), num(row.rhs), num(row.rhs_se),
                          num(row.diff_se), num(row.slack), num(row.z), num(row.monotonicity_violations),
                          row.pass ? "1" : "0", num(c.replicas), num(o.seed)});
      r.estimates.push_back(
          mean_estimate(to_string(k) + " " + row.event.name + " lhs", row.lhs, row.lhs_se, c.replicas, o.seed));
      r.estimates.push_back(
          mean_estimate(to_string(k) + " " + row.event.name + " rhs", row.rhs, row.rhs_se, c.replicas, o.seed));
      add_check(r, to_string(k) + " " + row.event.name + ": lhs <= rhs + 3 se",
                row.pass && row.monotonicity_violations == 0,
                z_detail(row.z) + ", monotonicity violations " + num(row.monotonicity_violations));
    }
  }
  r.tables.push_back(tab);
  r.summary["seeds"] = seeds;
}

void run_connectivity(const ExperimentConfig& c, ExperimentResult& r) {
  Table tab{"failure", {"u", "R", "eps", "events", "trials", "rate", "ci_lo", "ci_hi", "replicas", "seed"}, {}};
  for (double u : c.u) {
    const uint64_t s = derive_seed(c.seed, "u=" + num(u));
    const auto rows = connectivity_experiment(c.d, u, c.window, c.eps, c.replicas, s, c.threads, c.halo_factor);
    std::vector<std::pair<double, double>> by_eps;
    for (const auto& row : rows) {
      tab.rows.push_back({num(u), num(c.window), num(row.eps), num(row.failure.events), num(row.failure.trials),
                          num(row.failure.rate), num(row.failure.ci.lo), num(row.failure.ci.hi), num(c.replicas),
                          num(s)});
      r.estimates.push_back(rate_estimate("failure u=" + num(u) + " eps=" + num(row.eps), row.failure, s));
      by_eps.emplace_back(row.eps, row.failure.rate);
    }
    std::sort(by_eps.begin(), by_eps.end());
    bool mono = true;
    for (size_t i = 1; i < by_eps.size(); ++i) mono = mono && by_eps[i].second <= by_eps[i - 1].second;
    add_check(r, "failure rate non-increasing in eps at u=" + num(u), mono, "");
    r.summary["seeds"]["u=" + num(u)] = s;
  }
  r.tables.push_back(tab);
}

void run_psi_growth(const ExperimentConfig& c, ExperimentResult& r) {
  const double eps = c.eps.front(), u = c.u.front();
  const auto rows = psi_growth_experiment(c.d, u, c.T, c.k, eps, c.replicas, c.seed, c.threads);
  Table tab{"growth",
            {"T", "median_capacity", "median_ci_lo", "median_ci_hi", "mean_capacity", "radius", "confined", "trials",
             "confined_rate", "ci_lo", "ci_hi", "replicas", "seed"},
            {}};
  bool increasing = true;
  for (size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    tab.rows.push_back({num(row.T), num(row.median_capacity), num(row.median_ci.lo), num(row.median_ci.hi),
                        num(row.capacity.mean()), num(row.confinement_radius), num(row.confined.events),
                        num(row.confined.trials), num(row.confined.rate), num(row.confined.ci.lo),
                        num(row.confined.ci.hi), num(c.replicas), num(c.seed)});
    r.estimates.push_back({"median cap U1 T=" + num(row.T), row.median_capacity, row.median_ci.lo, row.median_ci.hi,
                           c.replicas, c.seed});
    r.estimates.push_back(rate_estimate("confined T=" + num(row.T), row.confined, c.seed));
    if (row.T >= c.confine_from) {
      add_check(r, "confinement in >= 99% of replicas at T=" + num(row.T), row.confined.rate >= 0.99,
                "rate " + num(row.confined.rate));
    }
    if (i > 0) increasing = increasing && row.median_capacity > rows[i - 1].median_capacity;
  }
  add_check(r, "median capacity strictly increasing in T", increasing, "");
  r.tables.push_back(tab);
  r.summary["seeds"] = {{"growth", c.seed}};
}

void run_laplace_check(const ExperimentConfig& c, ExperimentResult& r) {
  Table tab{"potentials", {"u", "potential", "support", "exact", "norm", "empirical", "se", "z", "replicas", "seed"}, {}};
  for (double u : c.u) {
    const uint64_t s = derive_seed(c.seed, "u=" + num(u));
    const LaplaceCheckReport rep = laplace_check(c.d, u, c.potentials, c.strength, c.replicas, s, c.threads,
                                                 c.halo_factor);
    const double lz = (rep.mean_local_time.mean() - u) / rep.mean_local_time.std_error();
    r.estimates.push_back(mean_estimate("mean local time u=" + num(u), rep.mean_local_time.mean(),
                                        rep.mean_local_time.std_error(), rep.mean_local_time.count(), s));
    add_check(r, "E[ell] = u at u=" + num(u), std::abs(lz) <= 3.0, z_detail(lz));
    for (size_t i = 0; i < rep.rows.size(); ++i) {
      const auto& row = rep.rows[i];
      std::string sup;
      for (const auto& [p, v] : row.V) {
        if (!sup.empty()) sup += ";";
        for (int a = 0; a < c.d; ++a) sup += (a ? " " : "") + num(p[size_t(a)]);
        sup += ":" + num(v);
      }
      tab.rows.push_back({num(u), num(uint64_t(i)), sup, num(row.exact), num(row.norm), num(row.empirical.mean()),
                          num(row.empirical.std_error()), num(row.z), num(c.replicas), num(s)});
      r.estimates.push_back(mean_estimate("exp moment u=" + num(u) + " potential " + num(uint64_t(i)),
                                          row.empirical.mean(), row.empirical.std_error(), row.empirical.count(), s));
      add_check(r, "Laplace transform u=" + num(u) + " potential " + num(uint64_t(i)), std::abs(row.z) <= 3.0,
                "exact " + num(row.exact) + ", " + z_detail(row.z));
    }
    r.summary["seeds"]["u=" + num(u)] = s;
  }
  r.tables.push_back(tab);
}

}  // namespace

bool ExperimentResult::all_pass() const {
  if (!complete) return false;
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

Estimate rate_estimate(const std::string& name, const RateEstimate& r, uint64_t seed) {
  return {name, r.rate, r.ci.lo, r.ci.hi, r.trials, seed};
}

Estimate mean_estimate(const std::string& name, double mean, double se, int64_t replicas, uint64_t seed) {
  return {name, mean, mean - 1.96 * se, mean + 1.96 * se, replicas, seed};
}

CompositionCheck flip_composition_check(int d, double h, double boundary, int replicas, uint64_t seed,
                                        const TruncationConstants& c) {
  CompositionCheck cc;
  cc.h = h;
  cc.K = truncation_K(h, c);
  cc.boundary = std::isnan(boundary) ? cc.K : boundary;
  cc.replicas = replicas;
  FlipBoundary b;
  b.d = d;
  b.b.assign(static_cast<size_t>(2 * d), cc.boundary);
  cc.exact = flip_prob_G(b, h, cc.K);
  const double sd = std::sqrt(sigma0_sq(d)), beta = b.beta();
  Stream rng(seed, 0);
  RunningStats G;
  std::vector<double> U(b.b.size());
  for (int i = 0; i < replicas; ++i) {
    const double phi = beta + sd * rng.normal();
    for (double& x : U) x = rng.uniform();
    G.add(flip_events(b, h, cc.K, phi, U).G);
  }
  cc.estimate = G.mean();
  cc.se = G.std_error();
  cc.z = cc.se > 0.0 ? (cc.estimate - cc.exact) / cc.se : 0.0;
  return cc;
}

std::vector<PsiGrowthRow> psi_growth_experiment(int d, double u, const std::vector<int64_t>& Ts, int k, double eps,
                                                int replicas, uint64_t seed, int threads) {
  std::vector<PsiGrowthRow> rows;
  for (size_t ti = 0; ti < Ts.size(); ++ti) {
    const int64_t T = Ts[ti];
    std::vector<double> cap(static_cast<size_t>(replicas));
    std::vector<int64_t> extent(static_cast<size_t>(replicas));
    parallel_for(replicas, threads, [&](int64_t i) {
      Stream rng = Stream(seed, uint64_t(i)).split(uint64_t(ti));
      const auto steps = psi_growth(u, Point{}, T, k, d, rng);
      cap[size_t(i)] = steps.front().capacity;
      extent[size_t(i)] = steps.back().extent;
    });
    PsiGrowthRow row;
    row.T = T;
    row.confinement_radius = std::pow(double(T), (1.0 + eps) / 2.0);
    int64_t confined = 0;
    for (int i = 0; i < replicas; ++i) {
      row.capacity.add(cap[size_t(i)]);
      // U^(k) inside x + [-kR, kR)^d; the extent is an l-inf norm, so require it below kR
      confined += double(extent[size_t(i)]) < double(k) * row.confinement_radius;
    }
    row.confined = make_rate(confined, replicas);
    std::vector<double> sorted = cap;
    std::sort(sorted.begin(), sorted.end());
    row.median_capacity = quantile(sorted, 0.5);
    const double n = double(replicas), half = 0.98 * std::sqrt(n);
    const auto clampi = [&](double x) { return size_t(std::clamp(x, 0.0, n - 1.0)); };
    row.median_ci = {sorted[clampi(std::floor(n / 2.0 - half))], sorted[clampi(std::ceil(n / 2.0 + half))]};
    rows.push_back(row);
  }
  return rows;
}

LaplaceCheckReport laplace_check(int d, double u, int potentials, double strength, int replicas, uint64_t seed,
                                 int threads, double halo_factor) {
  const Box window = make_box(d, std::vector<int64_t>(static_cast<size_t>(d), 4));
  LaplaceCheckReport rep;
  for (int p = 0; p < potentials; ++p) {
    Stream prng = Stream(seed, 0).split(uint64_t(p));
    LaplaceRow row;
    const double sign = p % 2 ? -1.0 : 1.0;
    for (int j = 0; j < 3; ++j) {
      Point x{};
      for (int a = 0; a < d; ++a) x[size_t(a)] = int64_t(prng.below(4));
      row.V.emplace_back(x, sign * strength * (0.5 + prng.uniform()));
    }
    const LaplaceResult ex = laplace_exact(row.V, u, d);
    row.exact = ex.value;
    row.norm = ex.norm;
    rep.rows.push_back(std::move(row));
  }
  const auto sampler = InterlacementSampler::get(window, halo_factor);
  std::vector<std::vector<double>> vals(static_cast<size_t>(replicas));
  parallel_for(replicas, threads, [&](int64_t r) {
    Stream rng(seed, uint64_t(r) + 1);
    const LocalTimes lt = local_time_field(sampler->sample(u, rng));
    std::vector<double> v;
    double tot = 0.0;
    for (double x : lt.values) tot += x;
    v.push_back(tot / double(lt.values.size()));
    for (const auto& row : rep.rows) {
      double s = 0.0;
      for (const auto& [x, w] : row.V) s += w * lt.at(x);
      v.push_back(std::exp(s));
    }
    vals[size_t(r)] = std::move(v);
  });
  for (const auto& v : vals) {
    rep.mean_local_time.add(v[0]);
    for (size_t i = 0; i < rep.rows.size(); ++i) rep.rows[i].empirical.add(v[i + 1]);
  }
  for (auto& row : rep.rows) row.z = (row.empirical.mean() - row.exact) / row.empirical.std_error();
  return rep;
}

ExperimentResult run(const ExperimentConfig& config, const std::string& out_dir) {
  validate(config);
  ExperimentResult r;
  r.config = config;
  const std::string& k = config.kind;
  if (k == "verify-iso") {
    run_verify_iso(config, r);
  } else if (k == "estimate-hstar") {
    run_estimate_hstar(config, r, out_dir);
  } else if (k == "cable-contrast") {
    run_cable_contrast(config, r, out_dir);
  } else if (k == "flip") {
    run_flip(config, r);
  } else if (k == "renorm-cert") {
    run_renorm_cert(config, r);
  } else if (k == "decouple") {
    run_decouple(config, r);
  } else if (k == "connectivity") {
    run_connectivity(config, r);
  } else if (k == "psi-growth") {
    run_psi_growth(config, r);
  } else if (k == "laplace-check") {
    run_laplace_check(config, r);
  } else {
    throw ConfigError("unknown experiment kind '" + k + "'");
  }
  return r;
}

json report_json(const ExperimentResult& r, bool with_timestamp) {
  json j;
  j["schema"] = kReportSchema;
  j["kind"] = r.config.kind;
  j["complete"] = r.complete;
  if (!r.error.empty()) j["error"] = r.error;
  j["pass"] = r.all_pass();
  j["config_hash"] = r.config.hash();
  json cfg = json::object();
  std::istringstream in(r.config.canonical());
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) cfg[line.substr(0, eq)] = line.substr(eq + 3);
  }
  j["config"] = cfg;
  j["seed"] = r.config.seed;
  j["checks"] = json::array();
  for (const auto& c : r.checks) j["checks"].push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  j["estimates"] = json::array();
  for (const auto& e : r.estimates) {
    j["estimates"].push_back({{"name", e.name},
                              {"point", e.point},
                              {"ci_lo", e.ci_lo},
                              {"ci_hi", e.ci_hi},
                              {"replicas", e.replicas},
                              {"seed", e.seed}});
  }
  j["tables"] = json::array();
  for (const auto& t : r.tables) {
    j["tables"].push_back({{"name", t.name}, {"file", r.config.kind + "_" + t.name + ".csv"}, {"rows", t.rows.size()}});
  }
  j["field_dumps"] = r.field_dumps;
  j["summary"] = r.summary;
  if (with_timestamp) {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    j["timestamp"] = buf;
  }
  return j;
}

std::string to_csv(const Table& t) {
  auto cell = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
  };
  std::string out;
  for (size_t i = 0; i < t.header.size(); ++i) out += (i ? "," : "") + cell(t.header[i]);
  out += "\n";
  for (const auto& row : t.rows) {
    for (size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + cell(row[i]);
    out += "\n";
  }
  return out;
}

namespace {
void write_atomic(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".part";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f << text;
    f.flush();
    if (!f) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}
}  // namespace

std::vector<std::string> emit_report(const ExperimentResult& r, const std::string& dir) {
  fs::create_directories(dir);
  std::vector<std::string> written;
  for (const auto& t : r.tables) {
    const fs::path p = fs::path(dir) / (r.config.kind + "_" + t.name + ".csv");
    write_atomic(p, to_csv(t));
    written.push_back(p.string());
  }
  const fs::path p = fs::path(dir) / (r.config.kind + ".json");
  write_atomic(p, report_json(r).dump(2) + "\n");
  written.push_back(p.string());
  return written;
}

}  // namespace cgff
