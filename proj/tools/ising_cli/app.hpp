#pragma once

#include <CLI11.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ising/ising.hpp"

#ifndef ISING_VERSION
#define ISING_VERSION "0.1.0"
#endif

namespace ising::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCertification = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitResource = 3;

inline constexpr std::size_t kMaxSpectralSites = 10;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string command;
  std::vector<std::size_t> n_list;
  std::vector<Coupling> j_list;
  std::optional<std::size_t> m;
  std::optional<double> m_power;
  Dynamics dynamics = Dynamics::wolff;
  std::string init = "auto";
  std::uint64_t seed = 1;
  std::size_t replicas = 1;
  std::string output;
  std::size_t threads = 1;
  double tol = 1e-12;
  double z_max = 4.0;
  std::size_t restarts = 10;

  std::size_t steps_for(std::size_t n) const {
    if (m_power) return static_cast<std::size_t>(std::llround(std::pow(static_cast<double>(n), *m_power)));
    return m.value_or(100000);
  }

  /// Flags that determine results; output location and thread count are excluded.
  std::string canonical() const {
    std::ostringstream os;
    os << command << " --n-list ";
    for (std::size_t i = 0; i < n_list.size(); ++i) os << (i ? "," : "") << n_list[i];
    os << " --j-list ";
    for (std::size_t i = 0; i < j_list.size(); ++i) os << (i ? "," : "") << j_list[i].to_string();
    if (m_power)
      os << " --m-power " << format_double(*m_power);
    else
      os << " --m " << m.value_or(100000);
    os << " --dynamics " << to_string(dynamics) << " --init " << init << " --seed " << seed << " --replicas "
       << replicas << " --tol " << format_double(tol) << " --z-max " << format_double(z_max) << " --restarts "
       << restarts;
    return os.str();
  }

  std::uint64_t hash() const {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char ch : canonical()) {
      h ^= ch;
      h *= 1099511628211ULL;
    }
    return h;
  }
};

namespace detail {

template <class T>
T parse_number(const std::string& s, const char* flag) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw UsageError(std::string(flag) + ": not a number: '" + s + "'");
  return v;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

inline std::uint64_t unit_stream(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::uint64_t v : parts)
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xFFU;
      h *= 1099511628211ULL;
    }
  return h;
}

inline std::uint64_t coupling_bits(Coupling j) {
  return j.is_infinite() ? ~std::uint64_t{0} : std::bit_cast<std::uint64_t>(j.value());
}

struct Defaults {
  std::vector<std::size_t> n;
  std::vector<Coupling> j;
  std::size_t replicas;
  std::optional<double> m_power;
};

inline Defaults defaults_for(const std::string& command) {
  const std::vector<Coupling> grid = {Coupling(0.0), Coupling(0.25), Coupling(0.5), Coupling(1.0), Coupling(2.0)};
  if (command == "kernel-verify") return {{2, 3, 4, 5, 6, 7, 8, 9, 10}, grid, 1, std::nullopt};
  if (command == "lsi-verify") return {{2, 3, 4, 5, 6, 7, 8}, grid, 1000, std::nullopt};
  if (command == "hitting") return {{16}, {Coupling::infinite()}, 1000, std::nullopt};
  if (command == "sweep") return {{8, 16, 32, 64}, {Coupling(0.5), Coupling(1.0)}, 1, 3.0};
  if (command == "spectra") return {{16}, {Coupling(0.5)}, 1, std::nullopt};
  return {{8}, {Coupling(0.5)}, 1, std::nullopt};
}

}  // namespace detail

/// Parses flags (and an optional --config key=value file whose keys mirror
/// flag names). Command-line values take precedence over the file.
/// Returns nullopt after printing help or version.
inline std::optional<RunConfig> parse_config(const std::vector<std::string>& args, std::ostream& out) {
  CLI::App app{"Ising ring dynamics: simulation, exact kernels, functional inequalities, ensemble spectra"};
  app.set_version_flag("--version", std::string(ISING_VERSION));
  app.set_config("--config", "", "flat key=value file; keys are flag names without dashes");
  app.allow_config_extras(CLI::config_extras_mode::error);

  std::string command, n, j_hat, m, m_power, dynamics, init, seed, replicas, output, threads, tol, z_max, restarts;
  std::vector<std::string> n_list, j_list;
  app.add_option("command", command, "simulate | kernel-verify | lsi-verify | spectra | hitting | sweep");
  app.add_option("--n", n, "number of sites");
  app.add_option("--n-list", n_list, "comma-separated site counts")->delimiter(',');
  app.add_option("--j-hat", j_hat, "coupling, or inf");
  app.add_option("--j-list", j_list, "comma-separated couplings")->delimiter(',');
  app.add_option("--m", m, "trajectory length M");
  app.add_option("--m-power", m_power, "use M = N^p");
  app.add_option("--dynamics", dynamics, "wolff | glauber");
  app.add_option("--init", init, "stationary | uniform | all-plus | explicit +/- string");
  app.add_option("--seed", seed, "master seed");
  app.add_option("--replicas", replicas, "replicas, random functions or initial states");
  app.add_option("--output", output, "output path prefix");
  app.add_option("--threads", threads, "worker threads (default: ISING_THREADS or hardware)");
  app.add_option("--tol", tol, "tolerance for exact checks");
  app.add_option("--z-max", z_max, "error-bar multiplier for statistical checks");
  app.add_option("--restarts", restarts, "adversarial search restarts (lsi-verify)");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::Success& e) {
    out << (e.get_name() == "CallForVersion" ? std::string(ISING_VERSION) + "\n" : app.help());
    return std::nullopt;
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  static const std::array<std::string, 6> commands = {"simulate", "kernel-verify", "lsi-verify",
                                                      "spectra",  "hitting",       "sweep"};
  if (command.empty()) throw UsageError("missing command");
  if (std::find(commands.begin(), commands.end(), command) == commands.end())
    throw UsageError("unknown command '" + command + "'");

  RunConfig c;
  c.command = command;
  const auto d = detail::defaults_for(command);

  if (app.count("--n") && app.count("--n-list")) throw UsageError("--n and --n-list are mutually exclusive");
  if (app.count("--j-hat") && app.count("--j-list")) throw UsageError("--j-hat and --j-list are mutually exclusive");
  if (app.count("--m") && app.count("--m-power")) throw UsageError("--m and --m-power are mutually exclusive");

  if (!n.empty()) n_list = {n};
  for (const auto& s : n_list) c.n_list.push_back(detail::parse_number<std::size_t>(s, "--n"));
  if (c.n_list.empty()) c.n_list = d.n;

  if (!j_hat.empty()) j_list = {j_hat};
  try {
    for (const auto& s : j_list) c.j_list.push_back(Coupling::parse(s));
  } catch (const ArgumentError& e) {
    throw UsageError(std::string("--j-hat: ") + e.what());
  }
  if (c.j_list.empty()) c.j_list = d.j;

  if (!m.empty()) c.m = detail::parse_number<std::size_t>(m, "--m");
  if (!m_power.empty()) c.m_power = detail::parse_number<double>(m_power, "--m-power");
  if (!c.m && !c.m_power) c.m_power = d.m_power;
  if (!dynamics.empty()) {
    try {
      c.dynamics = parse_dynamics(dynamics);
    } catch (const ArgumentError& e) {
      throw UsageError(std::string("--dynamics: ") + e.what());
    }
  }
  if (!init.empty()) c.init = init;
  if (!seed.empty()) c.seed = detail::parse_number<std::uint64_t>(seed, "--seed");
  c.replicas = replicas.empty() ? d.replicas : detail::parse_number<std::size_t>(replicas, "--replicas");
  c.output = output;
  c.threads = threads.empty() ? default_thread_count() : detail::parse_number<std::size_t>(threads, "--threads");
  if (!tol.empty()) c.tol = detail::parse_number<double>(tol, "--tol");
  if (!z_max.empty()) c.z_max = detail::parse_number<double>(z_max, "--z-max");
  if (!restarts.empty()) c.restarts = detail::parse_number<std::size_t>(restarts, "--restarts");

  // Validation.
  for (std::size_t v : c.n_list)
    if (v < 2) throw UsageError("--n must be at least 2");
  if (c.m && *c.m < 1) throw UsageError("--m must be at least 1");
  if (c.m_power && !(*c.m_power > 0.0 && *c.m_power <= 6.0)) throw UsageError("--m-power must lie in (0, 6]");
  if (c.replicas < 1) throw UsageError("--replicas must be at least 1");
  if (c.threads < 1) throw UsageError("--threads must be at least 1");
  if (!(c.tol > 0.0)) throw UsageError("--tol must be positive");
  if (!(c.z_max > 0.0)) throw UsageError("--z-max must be positive");

  const bool any_inf = std::any_of(c.j_list.begin(), c.j_list.end(), [](Coupling j) { return j.is_infinite(); });
  const bool any_finite = std::any_of(c.j_list.begin(), c.j_list.end(), [](Coupling j) { return !j.is_infinite(); });
  const std::size_t n_max = *std::max_element(c.n_list.begin(), c.n_list.end());

  if (command == "kernel-verify" || command == "lsi-verify") {
    if (any_inf) throw UsageError(command + ": the Gibbs measure is undefined at j-hat = inf");
    const std::size_t cap = command == "kernel-verify" ? kMaxKernelSites : kMaxSpectralSites;
    if (n_max > cap)
      throw UsageError(command + ": N = " + std::to_string(n_max) + " exceeds the exact-kernel cap of " +
                       std::to_string(cap));
  }
  if (command == "hitting") {
    if (any_finite) throw UsageError("hitting: requires --j-hat inf");
    if (c.dynamics != Dynamics::wolff) throw UsageError("hitting: only Wolff dynamics is defined at j-hat = inf");
  }
  if (command == "simulate") {
    if (any_inf && c.dynamics == Dynamics::glauber) throw UsageError("simulate: Glauber dynamics needs finite j-hat");
    if (any_inf && c.init == "stationary")
      throw UsageError("simulate: stationary start needs the Gibbs measure, undefined at j-hat = inf");
    if (c.init != "auto" && c.init != "stationary" && c.init != "uniform" && c.init != "all-plus") {
      try {
        const auto cfg = Configuration::parse(c.init);
        for (std::size_t v : c.n_list)
          if (v != cfg.n()) throw UsageError("--init: configuration length does not match --n");
      } catch (const ArgumentError& e) {
        throw UsageError(std::string("--init: ") + e.what());
      }
    }
  } else if (c.init != "auto") {
    throw UsageError("--init applies to simulate only");
  }
  if ((command == "spectra" || command == "sweep") && c.dynamics != Dynamics::wolff)
    throw UsageError(command + ": ensembles are generated by Wolff dynamics");
  return c;
}

namespace detail {

inline void trailer(std::ostream& os, const RunConfig& c) {
  os << "# version=" << ISING_VERSION << "\n# config_hash=" << hex64(c.hash()) << "\n# command=" << c.canonical()
     << '\n';
}

/// Writes CSV text plus the metadata trailer to `<prefix><suffix>.csv`, or to
/// `out` when no prefix was given.
inline void emit(const RunConfig& c, const std::string& suffix, const std::string& body, std::ostream& out) {
  if (c.output.empty()) {
    out << body;
    trailer(out, c);
    return;
  }
  const std::string path = c.output + suffix + ".csv";
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ResourceError("cannot open '" + path + "' for writing");
  f << body;
  trailer(f, c);
  if (!f) throw ResourceError("failed writing '" + path + "'");
  out << "wrote " << path << '\n';
}

inline InitialLaw initial_law(const RunConfig& c, Coupling j) {
  if (c.init == "stationary") return InitialLaw::stationary();
  if (c.init == "uniform") return InitialLaw::uniform();
  if (c.init == "all-plus") return InitialLaw::all_plus();
  if (c.init == "auto") return j.is_infinite() ? InitialLaw::uniform() : InitialLaw::stationary();
  return InitialLaw::fixed(Configuration::parse(c.init));
}

struct Cell {
  std::size_t n;
  Coupling j;
};

inline std::vector<Cell> grid(const RunConfig& c) {
  std::vector<Cell> out;
  for (std::size_t n : c.n_list)
    for (Coupling j : c.j_list) out.push_back({n, j});
  return out;
}

}  // namespace detail

inline int run_simulate(const RunConfig& c, std::ostream& out) {
  struct Unit {
    detail::Cell cell;
    std::size_t replica;
  };
  struct Result {
    std::size_t m = 0;
    double mag = 0.0, abs_mag = 0.0, nn = 0.0, exact_nn = std::numeric_limits<double>::quiet_NaN();
  };
  std::vector<Unit> units;
  for (const auto& cell : detail::grid(c))
    for (std::size_t r = 0; r < c.replicas; ++r) units.push_back({cell, r});
  std::vector<Result> results(units.size());
  parallel_for(units.size(), c.threads, [&](std::size_t u) {
    const auto& [cell, r] = units[u];
    const ModelParams p(cell.n, cell.j);
    RngStream rng(c.seed, detail::unit_stream({cell.n, detail::coupling_bits(cell.j),
                                               static_cast<std::uint64_t>(c.dynamics), r}));
    RunningMean mag, abs_mag, nn;
    const double inv_n = 1.0 / static_cast<double>(cell.n);
    Result res;
    res.m = c.steps_for(cell.n);
    stream_chain(detail::initial_law(c, cell.j), res.m, c.dynamics, p, rng,
                 [&](std::size_t, const Configuration& y) {
                   const double mm = static_cast<double>(y.magnetization()) * inv_n;
                   mag.add(mm);
                   abs_mag.add(std::abs(mm));
                   nn.add(static_cast<double>(y[0] * y[1]));
                 });
    res.mag = mag.mean();
    res.abs_mag = abs_mag.mean();
    res.nn = nn.mean();
    if (!cell.j.is_infinite()) res.exact_nn = two_point_correlation(1, 2, p);
    results[u] = res;
  });

  std::ostringstream csv;
  csv << "n,j_hat,dynamics,replica,m,mean_magnetization,mean_abs_magnetization,mean_nn,exact_nn\n";
  for (std::size_t u = 0; u < units.size(); ++u) {
    const auto& [cell, r] = units[u];
    const auto& res = results[u];
    csv << cell.n << ',' << cell.j.to_string() << ',' << to_string(c.dynamics) << ',' << r << ',' << res.m << ','
        << format_double(res.mag) << ',' << format_double(res.abs_mag) << ',' << format_double(res.nn) << ','
        << format_double(res.exact_nn) << '\n';
  }
  out << "simulate: " << units.size() << " run(s)\n";
  detail::emit(c, "", csv.str(), out);
  return kExitOk;
}

inline int run_kernel_verify(const RunConfig& c, std::ostream& out) {
  struct Result {
    double row_sum = 0, diagonal = 0, balance = 0, stationarity = 0, comparison = 0;
    bool pass = false;
  };
  const auto cells = detail::grid(c);
  std::vector<Result> results(cells.size());
  parallel_for(cells.size(), c.threads, [&](std::size_t u) {
    const ModelParams p(cells[u].n, cells[u].j);
    const auto k = build_wolff_kernel(p);
    const GibbsMeasure mu(p);
    Result r;
    r.row_sum = k.max_row_sum_error();
    r.diagonal = k.max_diagonal();
    r.balance = check_detailed_balance(k, mu);
    r.stationarity = stationarity_violation(k, mu);
    const auto cmp = compare_glauber_wolff(p);
    r.comparison = cmp.max_ratio;
    r.pass = r.row_sum <= c.tol && r.diagonal == 0.0 && r.balance <= c.tol && cmp.pass(c.tol) && k.min_entry() >= 0.0;
    results[u] = r;
  });

  std::ostringstream csv;
  csv << "n,j_hat,row_sum_error,max_diagonal,detailed_balance,stationarity,comparison_ratio,pass\n";
  double worst = 0.0;
  bool all = true;
  for (std::size_t u = 0; u < cells.size(); ++u) {
    const auto& r = results[u];
    csv << cells[u].n << ',' << cells[u].j.to_string() << ',' << format_double(r.row_sum) << ','
        << format_double(r.diagonal) << ',' << format_double(r.balance) << ',' << format_double(r.stationarity) << ','
        << format_double(r.comparison) << ',' << (r.pass ? 1 : 0) << '\n';
    worst = std::max(worst, r.balance);
    all = all && r.pass;
    if (!r.pass) out << "FAIL n=" << cells[u].n << " j_hat=" << cells[u].j.to_string() << '\n';
  }
  out << "kernel-verify: " << cells.size() << " cell(s)\n";
  out << "detailed-balance max-violation: " << format_double(worst) << '\n';
  out << (all ? "certified" : "certification failed") << '\n';
  detail::emit(c, "", csv.str(), out);
  return all ? kExitOk : kExitCertification;
}

inline int run_lsi_verify(const RunConfig& c, std::ostream& out) {
  constexpr std::size_t bins = 20;
  struct Result {
    double c_ls = 0, c_pi = 0, inverse_gap = 0, min_lsi = 0, min_pi = 0;
    std::size_t functions = 0;
    bool gap_pass = false, pass = false;
    std::array<std::size_t, bins + 1> lsi_hist{}, pi_hist{};
    std::vector<InequalityRow> lsi_rows, pi_rows;
  };
  const auto cells = detail::grid(c);
  std::vector<Result> results(cells.size());
  const bool keep_rows = !c.output.empty();
  parallel_for(cells.size(), c.threads, [&](std::size_t u) {
    const ModelParams p(cells[u].n, cells[u].j);
    const auto k = build_wolff_kernel(p);
    const GibbsMeasure mu(p);
    const auto d = symmetrize_and_decompose(k, mu);
    RngStream rng(c.seed, detail::unit_stream({cells[u].n, detail::coupling_bits(cells[u].j)}));
    Result r;
    r.c_ls = lsi_constant_bound(p);
    r.c_pi = poincare_constant_bound(p);
    r.inverse_gap = 1.0 / d.gap;
    r.gap_pass = r.c_pi - r.inverse_gap >= -1e-10;
    r.min_lsi = r.min_pi = std::numeric_limits<double>::infinity();
    bool ok = true;
    auto bucket = [](const InequalityReport& rep) {
      const double ratio = rep.rhs > 0.0 ? rep.lhs / rep.rhs : 0.0;
      if (ratio > 1.0) return bins;
      return std::min(bins - 1, static_cast<std::size_t>(std::max(0.0, ratio) * bins));
    };
    auto check = [&](TestFamily fam, const StateFunction& f) {
      const auto a = certify_lsi(f, k, mu, r.c_ls);
      const auto b = certify_poincare(f, k, mu, r.c_pi);
      ok = ok && a.pass && b.pass;
      r.min_lsi = std::min(r.min_lsi, a.slack);
      r.min_pi = std::min(r.min_pi, b.slack);
      ++r.lsi_hist[bucket(a)];
      ++r.pi_hist[bucket(b)];
      ++r.functions;
      if (keep_rows) {
        r.lsi_rows.push_back({p.n(), p.j_hat(), fam, a});
        r.pi_rows.push_back({p.n(), p.j_hat(), fam, b});
      }
    };
    for (std::size_t t = 0; t < c.replicas; ++t) check(TestFamily::gaussian, gaussian_function(mu.size(), rng));
    for (const auto& lf : structured_functions(p.n(), d)) check(lf.family, lf.values);
    if (c.restarts > 0)
      for (auto kind : {InequalityKind::log_sobolev, InequalityKind::poincare})
        check(TestFamily::adversarial, RatioAdversary(k, mu, kind).search(rng, c.restarts, 20).f);
    r.pass = ok && r.gap_pass;
    results[u] = std::move(r);
  });

  std::ostringstream csv;
  csv << "n,j_hat,functions,c_ls,c_pi,inverse_gap,min_lsi_slack,min_poincare_slack,gap_pass,pass\n";
  std::array<std::size_t, bins + 1> lsi_hist{}, pi_hist{};
  bool all = true;
  for (std::size_t u = 0; u < cells.size(); ++u) {
    const auto& r = results[u];
    csv << cells[u].n << ',' << cells[u].j.to_string() << ',' << r.functions << ',' << format_double(r.c_ls) << ','
        << format_double(r.c_pi) << ',' << format_double(r.inverse_gap) << ',' << format_double(r.min_lsi) << ','
        << format_double(r.min_pi) << ',' << (r.gap_pass ? 1 : 0) << ',' << (r.pass ? 1 : 0) << '\n';
    for (std::size_t b = 0; b <= bins; ++b) {
      lsi_hist[b] += r.lsi_hist[b];
      pi_hist[b] += r.pi_hist[b];
    }
    all = all && r.pass;
    if (!r.pass) out << "FAIL n=" << cells[u].n << " j_hat=" << cells[u].j.to_string() << '\n';
  }
  std::ostringstream hist;
  hist << "inequality,bin_lo,bin_hi,count\n";
  for (const auto& [name, h] : {std::pair{"log_sobolev", &lsi_hist}, std::pair{"poincare", &pi_hist}})
    for (std::size_t b = 0; b <= bins; ++b)
      hist << name << ',' << format_double(static_cast<double>(b) / bins) << ','
           << (b < bins ? format_double(static_cast<double>(b + 1) / bins) : "inf") << ',' << (*h)[b] << '\n';

  out << "lsi-verify: " << cells.size() << " cell(s)\n";
  out << (all ? "certified" : "certification failed") << '\n';
  detail::emit(c, "", csv.str(), out);
  detail::emit(c, "_slack_hist", hist.str(), out);
  if (keep_rows) {
    std::vector<InequalityRow> lsi, pi;
    for (auto& r : results) {
      lsi.insert(lsi.end(), r.lsi_rows.begin(), r.lsi_rows.end());
      pi.insert(pi.end(), r.pi_rows.begin(), r.pi_rows.end());
    }
    std::ostringstream a, b;
    write_inequality_csv(a, lsi);
    write_inequality_csv(b, pi);
    detail::emit(c, "_lsi_functions", a.str(), out);
    detail::emit(c, "_poincare_functions", b.str(), out);
  }
  return all ? kExitOk : kExitCertification;
}

inline std::vector<CondensationRow> condensation_rows(const RunConfig& c, std::ostream& out) {
  std::vector<CondensationCell> cells;
  for (const auto& g : detail::grid(c))
    for (std::size_t r = 0; r < c.replicas; ++r) cells.push_back({g.n, g.j, c.steps_for(g.n), c.seed + r});
  CondensationOptions opt;
  opt.z = c.z_max;
  const auto rows = condensation_experiment(cells, opt, c.threads);
  for (const auto& r : rows)
    out << "n=" << r.cell.n << " j_hat=" << r.cell.j_hat.to_string() << " m=" << r.cell.m << " seed=" << r.cell.seed
        << " lambda1=" << format_double(r.lambda1) << " norm1=" << format_double(r.norm1) << '\n';
  return rows;
}

inline bool rows_pass(const std::vector<CondensationRow>& rows) {
  return std::all_of(rows.begin(), rows.end(), [](const CondensationRow& r) {
    return r.pass_41 != Verdict::fail && r.pass_42 != Verdict::fail && r.pass_43 != Verdict::fail;
  });
}

inline int run_spectra(const RunConfig& c, std::ostream& out) {
  const auto rows = condensation_rows(c, out);
  std::ostringstream csv;
  write_condensation_csv(csv, rows);
  const bool ok = rows_pass(rows);
  out << (ok ? "certified" : "certification failed") << '\n';
  detail::emit(c, "", csv.str(), out);
  return ok ? kExitOk : kExitCertification;
}

/// Along increasing N at fixed (J, seed), ||K||_1 must not increase by more
/// than 3 combined batch standard errors.
inline int run_sweep(const RunConfig& c, std::ostream& out) {
  const auto rows = condensation_rows(c, out);
  std::ostringstream csv;
  write_condensation_csv(csv, rows);
  bool ok = rows_pass(rows);
  for (Coupling j : c.j_list) {
    if (j.is_infinite()) continue;
    for (std::size_t r = 0; r < c.replicas; ++r) {
      std::vector<const CondensationRow*> path;
      for (const auto& row : rows)
        if (row.cell.j_hat == j && row.cell.seed == c.seed + r) path.push_back(&row);
      std::stable_sort(path.begin(), path.end(), [](auto* a, auto* b) { return a->cell.n < b->cell.n; });
      bool mono = true;
      for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        const double slack = 3.0 * std::hypot(path[i]->norm1_se, path[i + 1]->norm1_se);
        mono = mono && path[i + 1]->norm1 <= path[i]->norm1 + slack;
      }
      out << "monotone j_hat=" << j.to_string() << " seed=" << c.seed + r << ": " << (mono ? "pass" : "FAIL") << '\n';
      ok = ok && mono;
    }
  }
  out << (ok ? "certified" : "certification failed") << '\n';
  detail::emit(c, "", csv.str(), out);
  return ok ? kExitOk : kExitCertification;
}

inline int run_hitting(const RunConfig& c, std::ostream& out) {
  struct Unit {
    std::size_t n, replica;
  };
  struct Result {
    std::string initial;
    std::size_t c_tilde = 0, hit = 0;
    bool alternates = false;
  };
  std::vector<Unit> units;
  for (std::size_t n : c.n_list)
    for (std::size_t r = 0; r < c.replicas; ++r) units.push_back({n, r});
  std::vector<Result> results(units.size());
  parallel_for(units.size(), c.threads, [&](std::size_t u) {
    const auto [n, r] = units[u];
    RngStream rng(c.seed, detail::unit_stream({n, r}));
    const auto start = sample_uniform(n, rng);
    Result res;
    res.initial = start.to_string();
    res.c_tilde = start.is_aligned() ? 0 : decompose(start).plus_count();
    WolffSampler sampler(ModelParams(n, Coupling::infinite()));
    Configuration y = start;
    std::size_t k = 1;
    while (!y.is_aligned() && k <= n + 2) {
      sampler.step(y, rng);
      ++k;
    }
    res.hit = k;
    res.alternates = y.is_aligned();
    for (std::size_t t = 0; t < 2 * n && res.alternates; ++t) {
      const Configuration prev = y;
      sampler.step(y, rng);
      res.alternates = y == -prev;
    }
    results[u] = res;
  });

  std::ostringstream csv;
  csv << "n,replica,initial,c_tilde,hit_index,in_range,alternates\n";
  bool ok = true;
  for (std::size_t u = 0; u < units.size(); ++u) {
    const auto& r = results[u];
    const bool in_range = r.hit == r.c_tilde || r.hit == r.c_tilde + 1;
    csv << units[u].n << ',' << units[u].replica << ',' << r.initial << ',' << r.c_tilde << ',' << r.hit << ','
        << (in_range ? 1 : 0) << ',' << (r.alternates ? 1 : 0) << '\n';
    ok = ok && in_range && r.alternates;
  }
  out << "hitting: " << units.size() << " initial configuration(s)\n";
  out << (ok ? "certified" : "certification failed") << '\n';
  detail::emit(c, "", csv.str(), out);
  return ok ? kExitOk : kExitCertification;
}

inline int execute(const RunConfig& c, std::ostream& out) {
  if (c.command == "simulate") return run_simulate(c, out);
  if (c.command == "kernel-verify") return run_kernel_verify(c, out);
  if (c.command == "lsi-verify") return run_lsi_verify(c, out);
  if (c.command == "spectra") return run_spectra(c, out);
  if (c.command == "sweep") return run_sweep(c, out);
  return run_hitting(c, out);
}

/// Full entry point: parse, validate, run. Returns the process exit code.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::optional<RunConfig> cfg;
  try {
    cfg = parse_config(args, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  if (!cfg) return kExitOk;
  try {
    return execute(*cfg, out);
  } catch (const ResourceError& e) {
    err << "resource error: " << e.what() << '\n';
    return kExitResource;
  } catch (const std::bad_alloc&) {
    err << "resource error: out of memory\n";
    return kExitResource;
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace ising::cli
