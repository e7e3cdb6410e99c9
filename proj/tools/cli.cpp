#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "critpoint/correlations.hpp"
#include "critpoint/covariance.hpp"
#include "critpoint/errors.hpp"
#include "critpoint/field.hpp"
#include "critpoint/goe.hpp"
#include "critpoint/kac_rice.hpp"
#include "critpoint/parallel.hpp"
#include "critpoint/validation.hpp"

namespace critpoint::cli {

namespace {

using json = nlohmann::ordered_json;

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) throw PreconditionError("not a number: '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::string csv_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Common {
  std::string model = "gaussian:a=1";
  std::string format;
  std::string output;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  bool cross_check = false;
};

unsigned env_threads() {
  if (const char* v = std::getenv("CRITPOINT_THREADS")) {
    unsigned t = 0;
    const std::string s(v);
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), t);
    if (ec == std::errc() && p == s.data() + s.size()) return t;
  }
  return 0;
}

// Tabular report: JSON rows or CSV with a header.
struct Table {
  std::vector<std::string> columns;
  std::vector<json> rows;

  std::string csv() const {
    std::string s;
    for (std::size_t i = 0; i < columns.size(); ++i) s += (i ? "," : "") + columns[i];
    s += "\n";
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < columns.size(); ++i) {
        if (i) s += ",";
        const auto it = r.find(columns[i]);
        if (it == r.end() || it->is_null()) continue;
        if (it->is_number_float()) s += csv_num(it->get<double>());
        else if (it->is_string()) s += it->get<std::string>();
        else s += it->dump();
      }
      s += "\n";
    }
    return s;
  }
};

struct Report {
  json doc;
  std::optional<Table> table;  // used for CSV output
  int exit_code = kExitOk;
};

json header(const std::string& command, const json& inputs) {
  json j;
  j["schema"] = 1;
  j["command"] = command;
  j["inputs"] = inputs;
  return j;
}

Report goe_density(const Common& c, int N, std::optional<int> k, const std::vector<double>& grid) {
  json inputs{{"N", N}, {"grid", grid.size()}, {"cross_check", c.cross_check}};
  if (k) inputs["k"] = *k;
  Table t;
  t.columns = {"ell", "k", "density", "method"};
  if (c.cross_check) {
    t.columns.push_back("closed_form");
    t.columns.push_back("gap");
  }
  for (double l : grid) {
    const auto q = ordered_eigen_densities(N, l);
    for (int kk = 1; kk <= N; ++kk) {
      if (k && *k != kk) continue;
      json row{{"ell", l}, {"k", kk}, {"density", q[static_cast<std::size_t>(kk - 1)]},
               {"method", "pfaffian"}};
      if (c.cross_check && N <= 5) {
        const double cf = closed_form_density(N, kk, l);
        row["closed_form"] = cf;
        row["gap"] = std::abs(cf - q[static_cast<std::size_t>(kk - 1)]);
      }
      t.rows.push_back(row);
    }
  }
  if (k && (*k < 1 || *k > N)) throw PreconditionError("k must be in 1..N");
  Report r{header("goe-density", inputs), t};
  r.doc["results"] = t.rows;
  return r;
}

Report goe_sample(const Common& c, int N, long long samples) {
  if (samples < 1) throw PreconditionError("samples must be >= 1");
  Table t;
  t.columns = {"sample"};
  for (int k = 1; k <= N; ++k) t.columns.push_back("L" + std::to_string(k));
  auto rng = stream_rng(c.seed, 0);
  for (long long s = 0; s < samples; ++s) {
    const auto spec = sample_goe_spectrum(N, rng);
    json row{{"sample", s}};
    for (int k = 1; k <= N; ++k) row["L" + std::to_string(k)] = spec[static_cast<std::size_t>(k - 1)];
    t.rows.push_back(row);
  }
  Report r{header("goe-sample", {{"N", N}, {"samples", samples}, {"seed", c.seed}}), t};
  r.doc["method"] = "monte-carlo";
  r.doc["seed"] = c.seed;
  r.doc["results"] = t.rows;
  return r;
}

Report counts(const Common& c, int N, std::optional<int> k, std::optional<double> u, double volume) {
  const auto model = parse_model(c.model);
  json inputs{{"model", model.describe()}, {"N", N}, {"volume", volume}};
  if (k) inputs["k"] = *k;
  if (u) inputs["u"] = *u;
  Table t;
  t.columns = {"k", "count", "method"};
  double total = 0.0;
  for (int kk = 0; kk <= N; ++kk) {
    if (k && *k != kk) continue;
    const double v = u ? mean_count_index_above(model, N, kk, *u, volume)
                       : mean_count_index(model, N, kk, volume);
    total += v;
    t.rows.push_back({{"k", kk}, {"count", v}, {"method", "quadrature"}});
  }
  if (k && (*k < 0 || *k > N)) throw PreconditionError("k must be in 0..N");
  Report r{header("counts", inputs), t};
  r.doc["results"] = {{"by_index", t.rows}, {"total", total}, {"method", "quadrature"}};
  if (c.cross_check && N == 2 && !k && !u) {
    const double cf = mean_count_total_2d(model, volume);
    r.doc["cross_check"] = {{"closed_form", cf}, {"method", "closed-form"}, {"gap", std::abs(cf - total)}};
  }
  return r;
}

Report fractions_cmd(const Common& c, int N) {
  const auto f = index_fractions(N);
  Table t;
  t.columns = {"k", "fraction", "method", "reference"};
  const auto ref = reference_fractions(N);
  for (int k = 0; k <= N; ++k) {
    json row{{"k", k}, {"fraction", f[static_cast<std::size_t>(k)]}, {"method", "quadrature"}};
    if (!ref.empty()) row["reference"] = ref[static_cast<std::size_t>(k)];
    t.rows.push_back(row);
  }
  Report r{header("fractions", {{"N", N}, {"cross_check", c.cross_check}}), t};
  json res{{"fractions", f}, {"method", "quadrature"}};
  if (ref.empty()) {
    res["reference"] = "none";
  } else {
    res["reference"] = ref;
    res["reference_method"] = "closed-form";
    if (c.cross_check) {
      double gap = 0.0;
      for (std::size_t i = 0; i < ref.size(); ++i) gap = std::max(gap, std::abs(ref[i] - f[i]));
      res["gap"] = gap;
    }
  }
  r.doc["results"] = res;
  return r;
}

Report corr_asymptote(const Common& c, int N, std::optional<int> k, const std::vector<double>& grid) {
  const auto model = parse_model(c.model);
  json inputs{{"model", model.describe()}, {"N", N}, {"rho", grid}};
  if (k) inputs["k"] = *k;
  Table t;
  t.columns = {"rho", "value", "method"};
  if (N == 1) t.columns.push_back("extrema_pair");
  if (c.cross_check && N == 1) t.columns.push_back("one_dimensional_law");
  const double l2 = model.spectral_moment(1), l4 = model.spectral_moment(2),
               l6 = model.spectral_moment(3);
  for (double rho : grid) {
    json row{{"rho", rho}};
    row["value"] = k ? corr_asymptote_adjacent(model, N, *k, rho) : corr_asymptote_total(model, N, rho);
    row["method"] = "quadrature";
    if (N == 1) row["extrema_pair"] = corr_1d_extrema_asymptote(model, 1, rho);
    if (c.cross_check && N == 1)
      row["one_dimensional_law"] =
          (l2 * l6 - l4 * l4) / (8 * std::numbers::pi * std::sqrt(l4 * l2 * l2 * l2)) * rho;
    t.rows.push_back(row);
  }
  Report r{header("corr-asymptote", inputs), t};
  r.doc["results"] = t.rows;
  return r;
}

json estimate_json(const CorrEstimate& e, std::uint64_t seed) {
  json j{{"rho", e.rho}, {"value", e.value}, {"std_error", e.std_error},
         {"samples", e.samples}, {"discarded", e.discarded}, {"method", "monte-carlo"},
         {"seed", seed}};
  if (e.index_pair) j["pair"] = std::to_string(e.index_pair->first) + "," + std::to_string(e.index_pair->second);
  return j;
}

Report corr_mc_cmd(const Common& c, int N, const std::vector<double>& grid, long long samples,
                   std::optional<std::pair<int, int>> pair, bool all_pairs, bool fit) {
  const auto model = parse_model(c.model);
  CorrMcOptions opts;
  opts.samples = samples;
  opts.seed = c.seed;
  opts.threads = c.threads;
  json inputs{{"model", model.describe()}, {"N", N}, {"rho", grid}, {"samples", samples},
              {"seed", c.seed}};
  if (pair) inputs["pair"] = std::to_string(pair->first) + "," + std::to_string(pair->second);
  Table t;
  t.columns = {"rho", "pair", "value", "std_error", "samples", "discarded", "method", "seed"};
  if (c.cross_check) t.columns.push_back("asymptote");
  std::vector<CorrEstimate> series;
  for (double rho : grid) {
    if (all_pairs) {
      const auto table = corr_mc_table(model, N, rho, opts);
      t.rows.push_back(estimate_json(table.total, c.seed));
      for (const auto& rowp : table.by_pair)
        for (const auto& e : rowp) t.rows.push_back(estimate_json(e, c.seed));
      series.push_back(table.total);
    } else {
      const auto e = corr_mc(model, N, rho, opts, pair);
      auto row = estimate_json(e, c.seed);
      if (c.cross_check && !pair) row["asymptote"] = corr_asymptote_total(model, N, rho);
      t.rows.push_back(row);
      series.push_back(e);
    }
  }
  Report r{header("corr-mc", inputs), t};
  r.doc["results"] = t.rows;
  if (fit) {
    const auto f = exponent_fit(series);
    r.doc["fit"] = {{"slope", f.slope}, {"slope_error", f.slope_error},
                    {"intercept", f.intercept}, {"points", f.points}};
  }
  return r;
}

Report simulate_cmd(const Common& c, const SimulationOptions& base, const std::vector<double>& bins,
                    std::optional<std::pair<int, int>> pair, const std::string& snapshot) {
  const auto model = parse_model(c.model);
  SimulationOptions opts = base;
  opts.seed = c.seed;
  opts.threads = c.threads;
  const auto sim = simulate(model, opts);
  json inputs{{"model", model.describe()}, {"N", opts.N}, {"side", opts.side},
              {"spacing", opts.spacing}, {"realizations", opts.realizations}, {"seed", c.seed}};
  Report r{header("simulate", inputs), std::nullopt};
  std::vector<CriticalPointRecord> all;
  for (const auto& v : sim.realizations) all.insert(all.end(), v.begin(), v.end());
  json res{{"method", "monte-carlo"},
           {"seed", c.seed},
           {"points", all.size()},
           {"volume_per_realization", sim.volume},
           {"density", sim.density},
           {"density_std_error", sim.density_error}};
  if (opts.N <= kMaxCountN) res["expected_density"] = mean_count_total(model, opts.N);
  res["diagnostics"] = {{"candidates", sim.stats.candidates},
                        {"newton_failures", sim.stats.newton_failures},
                        {"degenerate", sim.stats.degenerate},
                        {"duplicates", sim.stats.duplicates}};
  if (!sim.warnings.empty()) res["warnings"] = sim.warnings;
  if (static_cast<long long>(all.size()) >= 1000) {
    const auto f = empirical_index_fractions(all, opts.N);
    res["fractions"] = {{"values", f.fractions}, {"counts", f.counts},
                        {"wilson_lower", f.lower}, {"wilson_upper", f.upper},
                        {"expected", index_fractions(opts.N)}};
  } else {
    res["fractions"] = "too few points (need 1000)";
  }
  Table t;
  t.columns = {"lo", "hi", "pairs", "a", "a_error", "g", "g_error", "empty"};
  if (!bins.empty()) {
    const auto pc = empirical_pair_correlation(sim.realizations, opts.N,
                                               opts.side * opts.spacing, bins, pair);
    for (const auto& b : pc)
      t.rows.push_back({{"lo", b.lo}, {"hi", b.hi}, {"pairs", b.pairs}, {"a", b.a},
                        {"a_error", b.a_error}, {"g", b.g}, {"g_error", b.g_error},
                        {"empty", b.empty}});
    res["pair_correlation"] = t.rows;
    r.table = t;
  }
  if (!snapshot.empty()) {
    const auto grid = synthesize(model, opts.N, opts.side, opts.spacing, realization_seed(c.seed, 0));
    std::ofstream f(snapshot, std::ios::binary);
    if (!f) throw PreconditionError("cannot open snapshot file " + snapshot);
    write_snapshot(grid, f);
    res["snapshot"] = snapshot;
  }
  r.doc["results"] = res;
  return r;
}

Report validate_cmd(const Common& c, const std::string& suite_name, std::ostream& err) {
  const Suite suite = parse_suite(suite_name);
  json rows = json::array();
  bool all = true;
  run_acceptance(suite, c.seed, c.threads, [&](const CriterionResult& r) {
    err << (r.passed ? "PASS" : "FAIL") << " [" << r.id << "] " << r.name << " (" << r.seconds
        << "s): " << r.detail << "\n";
    rows.push_back({{"id", r.id}, {"name", r.name}, {"passed", r.passed}, {"detail", r.detail}});
    all = all && r.passed;
  });
  Report rep{header("validate", {{"suite", suite_name}, {"seed", c.seed}}), std::nullopt};
  rep.doc["results"] = rows;
  rep.doc["passed"] = all;
  rep.exit_code = all ? kExitOk : kExitValidationFailed;
  return rep;
}

std::optional<std::pair<int, int>> parse_pair(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const auto parts = split(s, ',');
  if (parts.size() != 2) throw PreconditionError("index pair must be i,j");
  return std::make_pair(static_cast<int>(parse_double(parts[0])),
                        static_cast<int>(parse_double(parts[1])));
}

// Values starting with '-' (e.g. "--grid -4:4:0.1") would otherwise be read as flags.
std::vector<std::string> glue_negative_values(const std::vector<std::string>& args) {
  static const std::vector<std::string> valued = {"--grid", "--rho", "--bins", "--u"};
  std::vector<std::string> out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i + 1 < args.size() && std::find(valued.begin(), valued.end(), args[i]) != valued.end() &&
        !args[i + 1].empty() && args[i + 1][0] == '-') {
      out.push_back(args[i] + "=" + args[i + 1]);
      ++i;
    } else {
      out.push_back(args[i]);
    }
  }
  return out;
}

}  // namespace

std::vector<double> parse_grid(const std::string& spec) {
  const auto parts = split(spec, ':');
  std::vector<double> g;
  if (parts.size() == 1) {
    g.push_back(parse_double(parts[0]));
    return g;
  }
  if (parts.size() == 3) {
    const double a = parse_double(parts[0]), b = parse_double(parts[1]), step = parse_double(parts[2]);
    if (!(step > 0) || !(b >= a)) throw PreconditionError("grid a:b:step needs a <= b and step > 0");
    const auto n = static_cast<long long>(std::floor((b - a) / step + 1e-9)) + 1;
    for (long long i = 0; i < n; ++i) {
      double v = a + static_cast<double>(i) * step;
      if (std::abs(v) < 1e-9 * step) v = 0.0;
      g.push_back(v);
    }
    return g;
  }
  if (parts.size() == 4) {
    const double a = parse_double(parts[0]), b = parse_double(parts[1]);
    const double count = parse_double(parts[2]);
    const auto n = static_cast<long long>(count);
    if (n < 1 || static_cast<double>(n) != count) throw PreconditionError("grid count must be a positive integer");
    const bool log = parts[3] == "log";
    if (!log && parts[3] != "lin") throw PreconditionError("grid spacing must be lin or log");
    if (log && !(a > 0 && b > 0)) throw PreconditionError("log grid needs positive endpoints");
    for (long long i = 0; i < n; ++i) {
      const double t = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
      g.push_back(log ? std::exp(std::log(a) + t * (std::log(b) - std::log(a))) : a + t * (b - a));
    }
    // Endpoints exactly as given, not as exp(log(.)).
    g.front() = a;
    if (n > 1) g.back() = b;
    return g;
  }
  throw PreconditionError("grid must be a:b:step or start:stop:count:lin|log");
}

int run_cli(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Critical points of Gaussian random fields: GOE densities, counts, correlations"};
  app.require_subcommand(1);
  Common c;
  std::optional<unsigned> threads_flag;

  auto add_common = [&](CLI::App* s, bool model) {
    if (model) s->add_option("--model", c.model, "gaussian:a=<a> or moments:l2=,l4=,l6=,l8=");
    s->add_option("--format", c.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    s->add_option("--output", c.output, "write the report to this file");
    s->add_option("--seed", c.seed, "base seed");
    s->add_option("--threads", threads_flag, "worker cap (default CRITPOINT_THREADS or all cores)");
    s->add_flag("--cross-check", c.cross_check, "also report an independent method and the gap");
  };

  int N = 2;
  std::optional<int> k;
  std::optional<double> u;
  double volume = 1.0;
  std::string grid = "-6:6:0.05";
  long long samples = 0;
  std::string pair_s, suite = "full", bins_s, snapshot;
  bool all_pairs = false, fit = false;
  SimulationOptions sim;

  auto* dens = app.add_subcommand("goe-density", "ordered eigenvalue densities of the GOE");
  dens->add_option("--N", N, "matrix size (2..8)")->required();
  dens->add_option("--k", k, "eigenvalue rank 1..N (default all)");
  dens->add_option("--grid", grid, "a:b:step or start:stop:count:lin|log");
  add_common(dens, false);

  auto* samp = app.add_subcommand("goe-sample", "sampled ordered GOE spectra");
  samp->add_option("--N", N, "matrix size")->required();
  samp->add_option("--samples", samples, "number of matrices")->required();
  add_common(samp, false);

  auto* cnt = app.add_subcommand("counts", "expected numbers of critical points by index");
  cnt->add_option("--N", N, "dimension (1..7)")->required();
  cnt->add_option("--k", k, "index 0..N (default all)");
  cnt->add_option("--u", u, "only points with field value above u");
  cnt->add_option("--volume", volume, "volume of the set");
  add_common(cnt, true);

  auto* frac = app.add_subcommand("fractions", "fraction of critical points of each index");
  frac->add_option("--N", N, "dimension (1..7)")->required();
  add_common(frac, false);

  auto* asym = app.add_subcommand("corr-asymptote", "small-separation correlation equivalents");
  asym->add_option("--N", N, "dimension")->required();
  asym->add_option("--k", k, "adjacent pair (k, k+1), 0..N-1");
  asym->add_option("--rho,--grid", grid, "separations")->required();
  add_common(asym, true);

  auto* mc = app.add_subcommand("corr-mc", "Monte Carlo two-point correlation function");
  mc->add_option("--N", N, "dimension")->required();
  mc->add_option("--rho,--grid", grid, "separations")->required();
  mc->add_option("--samples", samples, "draws per separation")->default_val(1'000'000);
  mc->add_option("--pair", pair_s, "index pair i,j");
  mc->add_flag("--all-pairs", all_pairs, "report the total and every index pair");
  mc->add_flag("--fit", fit, "fit the exponent of log A against log rho");
  add_common(mc, true);

  auto* simc = app.add_subcommand("simulate", "simulate fields and detect critical points");
  simc->add_option("--N", sim.N, "dimension (1..3)")->required();
  simc->add_option("--side", sim.side, "grid points per axis (power of two)");
  simc->add_option("--spacing", sim.spacing, "grid spacing");
  simc->add_option("--realizations", sim.realizations, "number of fields");
  simc->add_option("--bins", bins_s, "pair-correlation bin edges as a grid spec");
  simc->add_option("--pair", pair_s, "index pair i,j for the pair correlation");
  simc->add_option("--snapshot", snapshot, "write realization 0 as a binary snapshot");
  add_common(simc, true);

  auto* val = app.add_subcommand("validate", "run the acceptance suite");
  val->add_option("--suite", suite, "full or quick")->check(CLI::IsMember({"full", "quick"}));
  add_common(val, false);

  const auto args = glue_negative_values(raw_args);
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsage;
  }
  c.threads = threads_flag ? *threads_flag : env_threads();

  try {
    Report rep;
    std::string default_format = "json";
    if (app.got_subcommand(dens)) {
      rep = goe_density(c, N, k, parse_grid(grid));
      default_format = "csv";
    } else if (app.got_subcommand(samp)) {
      rep = goe_sample(c, N, samples);
      default_format = "csv";
    } else if (app.got_subcommand(cnt)) {
      rep = counts(c, N, k, u, volume);
    } else if (app.got_subcommand(frac)) {
      rep = fractions_cmd(c, N);
    } else if (app.got_subcommand(asym)) {
      rep = corr_asymptote(c, N, k, parse_grid(grid));
    } else if (app.got_subcommand(mc)) {
      rep = corr_mc_cmd(c, N, parse_grid(grid), samples, parse_pair(pair_s), all_pairs, fit);
    } else if (app.got_subcommand(simc)) {
      rep = simulate_cmd(c, sim, bins_s.empty() ? std::vector<double>{} : parse_grid(bins_s),
                         parse_pair(pair_s), snapshot);
    } else {
      rep = validate_cmd(c, suite, err);
    }
    const std::string format = c.format.empty() ? default_format : c.format;
    std::string text;
    if (format == "csv") {
      if (!rep.table) throw PreconditionError("this command has no tabular output; use --format json");
      text = rep.table->csv();
    } else {
      text = rep.doc.dump(2) + "\n";
    }
    if (c.output.empty()) {
      out << text;
    } else {
      std::ofstream f(c.output);
      if (!f) throw PreconditionError("cannot open output file " + c.output);
      f << text;
    }
    return rep.exit_code;
  } catch (const PreconditionError& e) {
    err << "precondition violated: " << e.what() << "\n";
    return kExitPrecondition;
  } catch (const Error& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace critpoint::cli
