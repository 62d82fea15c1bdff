#pragma once

// Executes a validated RunConfig: builds the system, runs one command and
// writes its tables (CSV) and plot data (.dat, whitespace-separated columns).

#include "topospec/config.hpp"
#include "topospec/reproduction.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace topospec {

enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_computation = 3 };

struct Artifact {
  std::string name;  // file name inside the output directory
  std::string content;
};

struct CommandResult {
  std::vector<Artifact> artifacts;
  bool success = true;  // false when `check` has failing criteria
};

inline MechanicalSystem build_system(const RunConfig& c, std::optional<double> energy = {}) {
  const int k = static_cast<int>(c.require<long>("system", "dimension"));
  const double m = c.value_or<double>("system", "metric.m", 1.0);
  const bool polar = c.value_or<std::string>("system", "metric.form", "cartesian") == "polar";
  const Chart chart = polar ? Chart::polar : Chart::cartesian;
  const std::string family = c.require<std::string>("system", "potential.family");
  const double e = energy ? *energy : c.require<double>("system", "energy");

  ParameterMap params{{"m", m}};
  if (auto l = c.get<double>("system", "angular_momentum")) params["angular_momentum"] = *l;
  if (auto h = c.get<double>("system", "hbar")) params["hbar"] = *h;

  KineticMetric metric = polar ? KineticMetric::polar(m) : KineticMetric::cartesian(m, k);
  if (family == "free") return {metric, PotentialField::free(k), e, params};
  if (family == "kepler") {
    const double alpha = c.require<double>("system", "potential.alpha");
    params["alpha"] = alpha;
    return {metric, PotentialField::kepler(alpha, k, chart), e, params};
  }
  std::vector<double> springs;
  for (int i = 1; i <= k; ++i) {
    const std::string key = "potential.k" + std::to_string(i);
    springs.push_back(c.require<double>("system", key));
    params["k" + std::to_string(i)] = springs.back();
  }
  if (polar) springs.resize(1);
  return {metric, PotentialField::harmonic(springs, chart), e, params};
}

namespace detail {

inline FiniteDifference fd_from(const RunConfig& c, FiniteDifference fd = {}) {
  fd.step_scale = c.value_or<double>("numeric", "fd.step", fd.step_scale);
  fd.order = static_cast<int>(c.value_or<long>("numeric", "fd.order", fd.order));
  return fd;
}

inline Vector to_vector(const std::vector<double>& xs) {
  return Eigen::Map<const Vector>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

inline std::string prefixed(const RunConfig& c, const std::string& name) {
  return c.value_or<std::string>("output", "prefix", "") + name;
}

inline std::string plot_row(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? " " : "") + format_number(xs[i]);
  return s + '\n';
}

inline CommandResult run_dynamics(const RunConfig& c, bool geodesic, std::ostream& log) {
  const MechanicalSystem system = build_system(c);
  DynamicsOptions opt;
  opt.tol = c.value_or<double>("numeric", "tol", opt.tol);
  opt.fd = fd_from(c, opt.fd);
  if (!c.value_or<bool>("numeric", "boundary_guard", true))
    opt.epsilon_stop.reset();
  else if (auto eps = c.get<double>("numeric", "epsilon_stop"))
    opt.epsilon_stop = *eps;

  const Vector q = to_vector(c.require<std::vector<double>>("command", "initial.q"));
  Vector dir = to_vector(c.require<std::vector<double>>("command", "initial.direction"));
  const double span = c.require<double>("command", "span");
  Trajectory traj = [&] {
    if (geodesic) return integrate_geodesic(system, {q, dir, 0.0}, span, opt);
    // the direction is scaled to the speed fixed by the energy
    const double budget = system.kinetic_budget(q);
    const double norm2 = dir.dot(system.metric().at(q) * dir);
    if (!(norm2 > 0)) throw DomainError("newton: initial direction has zero length");
    dir *= std::sqrt(std::max(0.0, 2 * budget) / norm2);
    return integrate_newton(system, {q, dir, 0.0}, span, opt);
  }();

  std::ostringstream csv, dat;
  write_trajectory_csv(csv, traj);
  for (const auto& s : traj.samples()) {
    std::vector<double> row{s.param};
    for (int i = 0; i < s.q.size(); ++i) row.push_back(s.q[i]);
    dat << plot_row(row);
  }
  const std::string name = geodesic ? "geodesic" : "newton";
  log << name << ": " << traj.samples().size() << " samples, " << traj.info().accepted
      << " accepted / " << traj.info().rejected << " rejected steps, max drift "
      << format_number(traj.info().max_drift)
      << (traj.termination() == Termination::boundary ? ", stopped at the boundary of E > V" : "")
      << '\n';
  return {{{prefixed(c, name + ".csv"), csv.str()}, {prefixed(c, name + ".dat"), dat.str()}}};
}

inline CommandResult run_curvature(const RunConfig& c, std::ostream& log) {
  const MechanicalSystem system = build_system(c);
  const int k = system.dimension();
  const Vector lo = to_vector(c.require<std::vector<double>>("command", "grid.lower"));
  const Vector hi = to_vector(c.require<std::vector<double>>("command", "grid.upper"));
  const int n = static_cast<int>(c.require<long>("command", "grid.n"));
  const FiniteDifference fd = fd_from(c);
  const bool even = k % 2 == 0;

  std::ostringstream csv, dat;
  CsvWriter table(csv);
  std::vector<std::string> cols;
  for (int i = 1; i <= k; ++i) cols.push_back("q" + std::to_string(i));
  cols.insert(cols.end(), {"kinetic_budget", "curvature_max_abs"});
  if (even) cols.push_back("euler_density");
  table.header(cols);

  std::vector<int> idx(k, 0);
  long inside = 0, total = 0;
  for (;;) {
    Vector q(k);
    for (int a = 0; a < k; ++a) q[a] = n == 1 ? lo[a] : lo[a] + (hi[a] - lo[a]) * idx[a] / (n - 1);
    ++total;
    if (sigma_contains(system, q)) {
      const auto r = curvature_two_form(system, q, Branch::automatic, fd);
      std::vector<double> row(q.data(), q.data() + k);
      row.push_back(system.kinetic_budget(q));
      row.push_back(r.max_abs());
      if (even) row.push_back(euler_density(r));
      table.row(row);
      std::vector<double> plot(q.data(), q.data() + k);
      plot.push_back(even ? row.back() : r.max_abs());
      dat << plot_row(plot);
      ++inside;
    }
    int a = 0;
    while (a < k && ++idx[a] == n) idx[a++] = 0;
    if (a == k) break;
    if (k == 2 && a == 1) dat << '\n';  // blank line between scan lines for surface plots
  }
  log << "curvature: " << inside << " of " << total << " grid points inside E > V\n";
  return {{{prefixed(c, "curvature.csv"), csv.str()}, {prefixed(c, "curvature.dat"), dat.str()}}};
}

inline CommandResult run_euler(const RunConfig& c, std::ostream& log) {
  const std::string shape = c.require<std::string>("command", "domain.shape");
  std::ostringstream csv, dat;
  if (shape == "reduced") {
    const double k = c.require<double>("system", "potential.k1");
    const double E = c.require<double>("system", "energy");
    const double q0 = c.require<double>("command", "domain.q0");
    const double angular = c.value_or<double>("command", "domain.angular_factor", std::numbers::pi);
    QuadratureOptions opt;
    opt.abs_tol = c.value_or<double>("numeric", "quad.abs_tol", 1e-13);
    opt.rel_tol = c.value_or<double>("numeric", "quad.rel_tol", 1e-12);
    opt.max_panels = static_cast<int>(c.value_or<long>("numeric", "quad.max_panels", opt.max_panels));
    const auto r = integrate_ho_reduced(k, E, q0, angular, opt);
    CsvWriter table(csv);
    table.header({"epsilon", "value", "error_estimate"});
    table.row({0.0, r.value, r.error});
    // density profile over [-q0, q0]
    for (int i = 0; i <= 200; ++i) {
      const double q = -q0 + 2 * q0 * i / 200.0;
      dat << plot_row({q, ho_reduced_density(k, E, q, angular)});
    }
    log << "euler (reduced oscillator): " << format_number(r.value);
    if (angular == std::numbers::pi)
      log << ", closed form " << format_number(euler_integral_ho_reduced(k, E, q0));
    log << '\n';
    if (!r.converged) throw NumericalError("euler: quadrature did not reach its tolerance");
    return {{{prefixed(c, "euler.csv"), csv.str()}, {prefixed(c, "euler.dat"), dat.str()}}};
  }

  const MechanicalSystem system = build_system(c);
  RegularizedDomain d{BoxRegion{}};
  if (shape == "box") {
    d.shape = BoxRegion{to_vector(c.require<std::vector<double>>("command", "domain.lower")),
                        to_vector(c.require<std::vector<double>>("command", "domain.upper"))};
  } else {
    double r0 = c.value_or<double>("command", "domain.r_inner", 0.0);
    double r1 = 0;
    if (auto outer = c.get<double>("command", "domain.r_outer")) {
      r1 = *outer;
    } else {
      const auto a = kepler_apsidal(system.metric().mass(), c.require<double>("system", "potential.alpha"),
                                    c.require<double>("system", "angular_momentum"), system.energy());
      r0 = a.r_minus;
      r1 = a.r_plus;
      log << "euler: apsidal radii " << format_number(r0) << ", " << format_number(r1) << '\n';
    }
    if (shape == "annulus")
      d.shape = AnnulusRegion{r0, r1};
    else
      d.shape = RadialRegion{r0, r1};
  }
  d.epsilon = c.value_or<double>("numeric", "epsilon", 0.0);
  d.inset = c.value_or<double>("numeric", "inset", 0.0);
  d.extrapolate = c.value_or<bool>("numeric", "extrapolate", false);
  d.quadrature.abs_tol = c.value_or<double>("numeric", "quad.abs_tol", d.quadrature.abs_tol);
  d.quadrature.rel_tol = c.value_or<double>("numeric", "quad.rel_tol", d.quadrature.rel_tol);
  d.quadrature.max_panels =
      static_cast<int>(c.value_or<long>("numeric", "quad.max_panels", d.quadrature.max_panels));
  d.fd = fd_from(c);
  const auto rep = integrate_euler(system, d);
  write_euler_report_csv(csv, rep);
  for (const auto& s : rep.samples) dat << plot_row({s.inset, s.value});
  log << "euler: " << format_number(rep.value) << " +- " << format_number(rep.error_estimate) << " ("
      << rep.verdict << ")\n";
  if (!rep.converged) throw NumericalError("euler: " + rep.verdict);
  return {{{prefixed(c, "euler.csv"), csv.str()}, {prefixed(c, "euler.dat"), dat.str()}}};
}

inline CommandResult run_spectrum(const RunConfig& c, std::ostream& log) {
  const std::string relation_name = c.require<std::string>("command", "relation");
  const std::string free_param = c.require<std::string>("command", "free_param");
  const auto levels = c.require<std::vector<double>>("command", "levels");
  const auto bracket = c.require<std::vector<double>>("command", "bracket");

  ParameterMap fixed;
  auto energy = [&] { return c.require<double>("system", "energy"); };
  const SpectrumRelation relation = [&] {
    if (relation_name == "ho") {
      fixed["k"] = c.require<double>("system", "potential.k1");
      if (free_param != "energy") fixed["energy"] = energy();
      if (free_param != "q0") fixed["q0"] = c.require<double>("command", "q0");
      return ho_relation();
    }
    fixed["m"] = c.value_or<double>("system", "metric.m", 1.0);
    fixed["alpha"] = c.require<double>("system", "potential.alpha");
    fixed["l"] = c.require<double>("system", "angular_momentum");
    if (free_param != "abs_energy") fixed["abs_energy"] = std::abs(energy());
    return relation_name == "kepler_printed" ? kepler_printed_relation() : kepler_boundary_relation();
  }();
  fixed.erase(free_param);
  try {
    relation.range(free_param);
  } catch (const DomainError& e) {
    throw ConfigError({std::string("free_param: ") + e.what()});
  }

  std::vector<SpectrumTableRow> rows;
  std::ostringstream csv, dat;
  for (double n : levels) {
    const auto sol = solve_level(relation, n, fixed, free_param, bracket[0], bracket[1]);
    for (const auto& w : sol.warnings) log << "spectrum: level " << format_number(n) << ": " << w << '\n';
    rows.push_back({n, free_param, sol.value, sol.f_value, sol.residual});
    dat << plot_row({n, sol.value});
  }
  write_spectrum_csv(csv, rows);
  log << "spectrum (" << relation.name() << "): " << rows.size() << " levels solved for " << free_param
      << '\n';
  return {{{prefixed(c, "spectrum.csv"), csv.str()}, {prefixed(c, "spectrum.dat"), dat.str()}}};
}

inline CommandResult run_check(const RunConfig& c, std::ostream& log) {
  const auto results = run_reproduction_suite();
  CommandResult out;
  for (const auto& r : results) {
    print_criterion(log, r);
    out.success = out.success && r.pass;
  }
  std::ostringstream csv;
  write_check_csv(csv, results);
  out.artifacts.push_back({prefixed(c, "check.csv"), csv.str()});
  return out;
}

}  // namespace detail

/// Runs the configured command without touching the file system.
inline CommandResult execute(const RunConfig& config, std::ostream& log) {
  const auto name = config.get<std::string>("command", "name");
  if (!name) throw ConfigError({"missing required key 'name' in [command]"});
  if (*name == "newton") return detail::run_dynamics(config, false, log);
  if (*name == "geodesic") return detail::run_dynamics(config, true, log);
  if (*name == "curvature") return detail::run_curvature(config, log);
  if (*name == "euler") return detail::run_euler(config, log);
  if (*name == "spectrum") return detail::run_spectrum(config, log);
  return detail::run_check(config, log);
}

/// Writes every artifact through a temporary file and a rename. If any write
/// fails, files already written by this call are removed again.
inline std::vector<std::filesystem::path> write_artifacts(const std::filesystem::path& dir,
                                                          const std::vector<Artifact>& artifacts) {
  namespace fs = std::filesystem;
  std::vector<fs::path> written;
  try {
    fs::create_directories(dir);
    for (const auto& a : artifacts) {
      const fs::path target = dir / a.name;
      const fs::path tmp = dir / (a.name + ".tmp");
      {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << a.content;
        out.close();
        if (!out) {
          fs::remove(tmp);
          throw Error("cannot write " + tmp.string());
        }
      }
      fs::rename(tmp, target);
      written.push_back(target);
    }
  } catch (...) {
    std::error_code ec;
    for (const auto& p : written) fs::remove(p, ec);
    throw;
  }
  return written;
}

/// Full run: execute, then write artifacts. Returns the process exit code;
/// diagnostics go to `err`.
inline int run(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& log,
               std::ostream& err) {
  try {
    const auto result = execute(config, log);
    for (const auto& p : write_artifacts(out_dir, result.artifacts)) log << "wrote " << p.string() << '\n';
    if (!result.success) {
      err << "error: one or more checks failed\n";
      return exit_computation;
    }
    return exit_ok;
  } catch (const ConfigError& e) {
    err << "config error:\n" << e.what() << '\n';
    return exit_config;
  } catch (const std::exception& e) {
    err << "computation error: " << e.what() << '\n';
    return exit_computation;
  }
}

}  // namespace topospec
