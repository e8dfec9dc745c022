#include "se2hypo/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <numbers>
#include <thread>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/tools/minima.hpp>
#include <fmt/format.h>

#include "se2hypo/errors.hpp"
#include "se2hypo/seeding.hpp"

namespace se2hypo {

namespace {

constexpr int kChunk = 256;

// Runs fn(begin, end) over consecutive chunks of [0, n) on `threads` workers and returns
// the per-chunk results in chunk order.
template <class Fn>
auto run_chunks(int n, int threads, Fn fn) -> std::vector<decltype(fn(0, 0))> {
  using R = decltype(fn(0, 0));
  const int chunks = (n + kChunk - 1) / kChunk;
  std::vector<R> results(chunks);
  std::vector<std::exception_ptr> errors(chunks);
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int c = next++; c < chunks; c = next++) {
      try {
        results[c] = fn(c * kChunk, std::min(n, (c + 1) * kChunk));
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  const int workers = std::max(1, std::min(threads, chunks));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

struct Moments {
  double n = 0.0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    n += 1.0;
    const double d = x - mean;
    mean += d / n;
    m2 += d * (x - mean);
  }
  void merge(const Moments& o) {
    if (o.n == 0.0) return;
    if (n == 0.0) {
      *this = o;
      return;
    }
    const double total = n + o.n;
    const double d = o.mean - mean;
    mean += d * o.n / total;
    m2 += o.m2 + d * d * n * o.n / total;
    n = total;
  }
};

struct CoMoments {
  double n = 0.0;
  double mx = 0.0, my = 0.0;
  double cxy = 0.0, m2x = 0.0, m2y = 0.0;

  void add(double x, double y) {
    n += 1.0;
    const double dx = x - mx;
    const double dy = y - my;
    mx += dx / n;
    my += dy / n;
    cxy += dx * (y - my);
    m2x += dx * (x - mx);
    m2y += dy * (y - my);
  }
  void merge(const CoMoments& o) {
    if (o.n == 0.0) return;
    if (n == 0.0) {
      *this = o;
      return;
    }
    const double total = n + o.n;
    const double dx = o.mx - mx, dy = o.my - my;
    const double f = n * o.n / total;
    cxy += o.cxy + dx * dy * f;
    m2x += o.m2x + dx * dx * f;
    m2y += o.m2y + dy * dy * f;
    mx += dx * o.n / total;
    my += dy * o.n / total;
    n = total;
  }
};

// Integrates one path, calling record(k, state) at k = 0, 1, ... every record_every steps.
// Returns false when the path aborted on a numerical error.
template <class Record>
bool run_path(const SimConfig& cfg, const EquilibriumSampler* sampler, std::uint64_t index,
              Record&& record) {
  Rng rng(stream_seed(cfg.seed, index));
  std::normal_distribution<double> normal;
  GroupPoint state = cfg.initial_point ? *cfg.initial_point : sampler->draw(rng);
  const int steps = cfg.steps();
  const int every = cfg.record_every();
  record(0, state);
  try {
    for (int s = 1; s <= steps; ++s) {
      state = step(state, cfg, normal(rng));
      if (s % every == 0) record(s / every, state);
    }
  } catch (const NumericalError&) {
    return false;
  }
  return true;
}

std::optional<EquilibriumSampler> make_sampler(const SimConfig& cfg) {
  if (cfg.initial_point) return std::nullopt;
  return EquilibriumSampler(cfg.potential);
}

void check_aborted(int aborted, int n_paths) {
  if (aborted > 0 && static_cast<double>(aborted) > 0.01 * n_paths) {
    throw NumericalError(fmt::format("{} of {} paths aborted (limit 1%)", aborted, n_paths));
  }
}

std::vector<double> record_times(const SimConfig& cfg) {
  const int records = cfg.steps() / cfg.record_every() + 1;
  std::vector<double> t(records);
  for (int k = 0; k < records; ++k) t[k] = static_cast<double>(k) * cfg.record_every() * cfg.dt;
  return t;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration and series

int SimConfig::steps() const { return static_cast<int>(std::llround(t_final / dt)); }

int SimConfig::record_every() const {
  return std::max(1, static_cast<int>(std::llround(sample_interval / dt)));
}

void SimConfig::validate() const {
  if (!std::isfinite(sigma) || sigma < 0.0) {
    throw ConfigError(fmt::format("sigma must be >= 0 and finite (got {})", sigma));
  }
  const double cap = 0.1 / std::max(1.0, sigma * sigma);
  if (!std::isfinite(dt) || !(dt > 0.0)) throw ConfigError(fmt::format("dt must be > 0 (got {})", dt));
  if (dt > cap) {
    throw ConfigError(fmt::format("dt = {} violates dt <= 0.1/max(1, sigma^2) = {}", dt, cap));
  }
  if (!std::isfinite(t_final) || t_final < dt) {
    throw ConfigError(fmt::format("t_final must be >= dt (got {})", t_final));
  }
  if (t_final / dt > 2.0e9) throw ConfigError("t_final / dt exceeds the step limit 2e9");
  if (n_paths < 1) throw ConfigError(fmt::format("n_paths must be >= 1 (got {})", n_paths));
  if (!(sample_interval > 0.0)) throw ConfigError("sample_interval must be > 0");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (initial_point) {
    if (!std::isfinite(initial_point->xi1()) || !std::isfinite(initial_point->xi2()) ||
        !std::isfinite(initial_point->theta())) {
      throw ConfigError("initial point must be finite");
    }
  } else if (!potential.is_normalizable()) {
    throw ConfigError("equilibrium start requires a normalizable potential");
  }
}

void ObservableSeries::validate() const {
  if (values.size() != times.size() || stderr_.size() != times.size()) {
    throw InputError("observable series: times, values and stderr must have equal lengths");
  }
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) throw InputError("observable series: times must increase");
  }
  for (double s : stderr_) {
    if (!(s >= 0.0)) throw InputError("observable series: stderr must be >= 0");
  }
}

Observable observable_by_name(const std::string& name) {
  if (name == "one") return [](const GroupPoint&) { return 1.0; };
  if (name == "cos_theta") return [](const GroupPoint& p) { return std::cos(p.theta()); };
  if (name == "sin_theta") return [](const GroupPoint& p) { return std::sin(p.theta()); };
  if (name == "xi1") return [](const GroupPoint& p) { return p.xi1(); };
  if (name == "xi2") return [](const GroupPoint& p) { return p.xi2(); };
  throw InputError("unknown observable '" + name + "'");
}

std::vector<std::string> observable_names() { return {"one", "cos_theta", "sin_theta", "xi1", "xi2"}; }

// ---------------------------------------------------------------------------
// Dynamics

GroupPoint step(const GroupPoint& state, const SimConfig& cfg, double noise) {
  const double c = std::cos(state.theta());
  const double s = std::sin(state.theta());
  std::array<double, 2> grad;
  try {
    grad = cfg.potential.evaluate(state.xi1(), state.xi2()).gradient;
  } catch (const InputError& e) {
    throw NumericalError(fmt::format("drift undefined at ({}, {}, {}): {}", state.xi1(),
                                     state.xi2(), state.theta(), e.what()));
  }
  const double turn = -grad[0] * s + grad[1] * c;  // ∇Φ·v⊥
  if (!std::isfinite(turn)) {
    throw NumericalError(fmt::format("non-finite drift at ({}, {}, {})", state.xi1(), state.xi2(),
                                     state.theta()));
  }
  const double sign = cfg.mirrored ? -1.0 : 1.0;
  return GroupPoint(state.xi1() - sign * c * cfg.dt, state.xi2() - sign * s * cfg.dt,
                    state.theta() + sign * turn * cfg.dt + cfg.sigma * std::sqrt(cfg.dt) * noise);
}

// ---------------------------------------------------------------------------
// Equilibrium sampler

EquilibriumSampler::EquilibriumSampler(const PotentialSpec& potential) : potential_(potential) {
  if (!potential.is_normalizable()) {
    throw ConfigError("equilibrium sampler: potential " + potential.id() + " is not normalizable");
  }
  const auto& kind = potential.kind();
  if (const auto* q = std::get_if<PotentialSpec::Quadratic>(&kind)) {
    mode_ = Mode::Gaussian;
    scale1_ = 1.0 / std::sqrt(q->a1);
    scale2_ = 1.0 / std::sqrt(q->a2);
    acceptance_ = 1.0;
    return;
  }
  if (const auto* w = std::get_if<PotentialSpec::DoubleWell>(&kind)) {
    // Envelope N(0, s² I): log sup e^{−Φ} / e^{−|ξ|²/(2s²)} = 1/(2s²) + 1/(4 h s⁴).
    const double h = w->height;
    auto log_bound = [h](double s) { return 1.0 / (2 * s * s) + 1.0 / (4 * h * s * s * s * s); };
    auto cost = [&](double s) { return log_bound(s) + 2.0 * std::log(s); };
    const auto best = boost::math::tools::brent_find_minima(cost, 0.05, 20.0, 40);
    mode_ = Mode::GaussianEnvelope;
    scale1_ = scale2_ = best.first;
    log_bound_ = log_bound(best.first);
    phi_min_ = 0.0;
    const Box box = potential.default_box();
    const double z = normalization(potential, MidpointRule{box, 256, 256});
    acceptance_ = z / (std::exp(log_bound_) * 2.0 * std::numbers::pi * best.first * best.first);
  } else {
    const auto& grid = *std::get<PotentialSpec::Tabulated>(kind).grid;
    mode_ = Mode::UniformEnvelope;
    box_ = grid.extent();
    phi_min_ = *std::min_element(grid.values.begin(), grid.values.end());
    const double z = normalization(potential, MidpointRule{box_, 256, 256});
    acceptance_ = z * std::exp(phi_min_) / box_.area();
  }
  if (acceptance_ < 1e-3) {
    throw ConfigError(fmt::format("equilibrium sampler: acceptance {:.3g} below 1e-3", acceptance_));
  }
}

GroupPoint EquilibriumSampler::draw(Rng& rng) const {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit;
  double x1 = 0.0, x2 = 0.0;
  switch (mode_) {
    case Mode::Gaussian:
      x1 = scale1_ * normal(rng);
      x2 = scale2_ * normal(rng);
      break;
    case Mode::GaussianEnvelope:
      for (;;) {
        x1 = scale1_ * normal(rng);
        x2 = scale2_ * normal(rng);
        const double r2 = x1 * x1 + x2 * x2;
        const double log_ratio = -potential_.value(x1, x2) + r2 / (2 * scale1_ * scale1_);
        if (std::log(unit(rng)) <= log_ratio - log_bound_) break;
      }
      break;
    case Mode::UniformEnvelope:
      for (;;) {
        x1 = box_.lo1 + (box_.hi1 - box_.lo1) * unit(rng);
        x2 = box_.lo2 + (box_.hi2 - box_.lo2) * unit(rng);
        if (unit(rng) <= std::exp(-(potential_.value(x1, x2) - phi_min_))) break;
      }
      break;
  }
  return GroupPoint(x1, x2, kTwoPi * unit(rng));
}

// ---------------------------------------------------------------------------
// Ensembles

EnsembleResult simulate_ensemble(const SimConfig& cfg, const Observable& observable) {
  cfg.validate();
  const auto sampler = make_sampler(cfg);
  const std::vector<double> times = record_times(cfg);
  const std::size_t records = times.size();

  struct Chunk {
    std::vector<Moments> moments;
    int aborted = 0;
  };
  auto chunks = run_chunks(cfg.n_paths, cfg.threads, [&](int begin, int end) {
    Chunk c;
    c.moments.resize(records);
    std::vector<double> buffer(records);
    for (int p = begin; p < end; ++p) {
      const bool ok = run_path(cfg, sampler ? &*sampler : nullptr, static_cast<std::uint64_t>(p),
                               [&](int k, const GroupPoint& x) { buffer[k] = observable(x); });
      if (!ok) {
        ++c.aborted;
        continue;
      }
      for (std::size_t k = 0; k < records; ++k) c.moments[k].add(buffer[k]);
    }
    return c;
  });

  std::vector<Moments> total(records);
  int aborted = 0;
  for (const Chunk& c : chunks) {
    aborted += c.aborted;
    for (std::size_t k = 0; k < records; ++k) total[k].merge(c.moments[k]);
  }
  check_aborted(aborted, cfg.n_paths);

  EnsembleResult r;
  r.aborted_paths = aborted;
  r.series.times = times;
  for (const Moments& m : total) {
    r.series.values.push_back(m.mean);
    r.series.stderr_.push_back(m.n > 1.0 ? std::sqrt(m.m2 / (m.n - 1.0) / m.n) : 0.0);
  }
  return r;
}

std::vector<GroupPoint> simulate_endpoints(const SimConfig& cfg) {
  cfg.validate();
  const auto sampler = make_sampler(cfg);
  struct Chunk {
    std::vector<GroupPoint> points;
    int aborted = 0;
  };
  auto chunks = run_chunks(cfg.n_paths, cfg.threads, [&](int begin, int end) {
    Chunk c;
    for (int p = begin; p < end; ++p) {
      GroupPoint last;
      const bool ok = run_path(cfg, sampler ? &*sampler : nullptr, static_cast<std::uint64_t>(p),
                               [&](int, const GroupPoint& x) { last = x; });
      if (ok) c.points.push_back(last);
      else ++c.aborted;
    }
    return c;
  });
  std::vector<GroupPoint> out;
  int aborted = 0;
  for (const Chunk& c : chunks) {
    aborted += c.aborted;
    out.insert(out.end(), c.points.begin(), c.points.end());
  }
  check_aborted(aborted, cfg.n_paths);
  return out;
}

// ---------------------------------------------------------------------------
// Stationarity

double kolmogorov_p_value(double d, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  if (lambda < 0.3) return 1.0;
  double q = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    q += (j % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(q, 0.0, 1.0);
}

StationarityReport stationarity_statistics(const PotentialSpec& potential,
                                           const std::vector<GroupPoint>& samples, double alpha) {
  if (samples.size() < 20) throw InputError("stationarity: need at least 20 samples");
  StationarityReport r;
  r.samples = samples.size();
  r.alpha = alpha;
  const double n = static_cast<double>(samples.size());

  // Fine midpoint quadrature of Z⁻¹e^{−Φ}.
  constexpr int kFine = 512;
  constexpr int kBins = 16;
  const Box box = potential.default_box();
  const double h1 = (box.hi1 - box.lo1) / kFine, h2 = (box.hi2 - box.lo2) / kFine;
  std::vector<double> mass(kFine * kFine);
  double phi_min = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kFine; ++i) {
    for (int j = 0; j < kFine; ++j) {
      mass[i * kFine + j] = potential.value(box.lo1 + (i + 0.5) * h1, box.lo2 + (j + 0.5) * h2);
      phi_min = std::min(phi_min, mass[i * kFine + j]);
    }
  }
  double total = 0.0;
  for (double& m : mass) {
    m = std::exp(-(m - phi_min));
    total += m;
  }
  for (double& m : mass) m /= total;

  // Bin edges at fine-cell boundaries closest to the marginal quantiles q/16.
  auto quantile_cuts = [&](bool first_axis) {
    std::vector<double> marginal(kFine, 0.0);
    for (int i = 0; i < kFine; ++i) {
      for (int j = 0; j < kFine; ++j) marginal[first_axis ? i : j] += mass[i * kFine + j];
    }
    std::vector<int> cuts;  // bin b covers fine cells [cuts[b], cuts[b+1])
    cuts.push_back(0);
    double cdf = 0.0;
    int q = 1;
    for (int i = 0; i < kFine && q < kBins; ++i) {
      cdf += marginal[i];
      if (cdf >= static_cast<double>(q) / kBins) {
        if (i + 1 > cuts.back()) cuts.push_back(i + 1);
        while (q < kBins && cdf >= static_cast<double>(q) / kBins) ++q;
      }
    }
    cuts.push_back(kFine);
    return cuts;
  };
  const std::vector<int> cut1 = quantile_cuts(true);
  const std::vector<int> cut2 = quantile_cuts(false);
  const int b1 = static_cast<int>(cut1.size()) - 1, b2 = static_cast<int>(cut2.size()) - 1;

  std::vector<double> expected(b1 * b2, 0.0);
  for (int a = 0; a < b1; ++a) {
    for (int b = 0; b < b2; ++b) {
      double p = 0.0;
      for (int i = cut1[a]; i < cut1[a + 1]; ++i) {
        for (int j = cut2[b]; j < cut2[b + 1]; ++j) p += mass[i * kFine + j];
      }
      expected[a * b2 + b] = n * p;
    }
  }
  // Outer bins extend to ±∞.
  auto bin_of = [](const std::vector<int>& cuts, double lo, double h, double x) {
    const int nb = static_cast<int>(cuts.size()) - 1;
    for (int b = 1; b < nb; ++b) {
      if (x < lo + cuts[b] * h) return b - 1;
    }
    return nb - 1;
  };
  std::vector<double> observed(b1 * b2, 0.0);
  for (const GroupPoint& s : samples) {
    observed[bin_of(cut1, box.lo1, h1, s.xi1()) * b2 + bin_of(cut2, box.lo2, h2, s.xi2())] += 1.0;
  }

  // Pool sparse cells.
  std::vector<std::pair<double, double>> cells;  // (expected, observed)
  double pool_e = 0.0, pool_o = 0.0;
  for (std::size_t c = 0; c < expected.size(); ++c) {
    if (expected[c] < 5.0) {
      pool_e += expected[c];
      pool_o += observed[c];
    } else {
      cells.emplace_back(expected[c], observed[c]);
    }
  }
  if (pool_e > 0.0 || pool_o > 0.0) {
    if (pool_e >= 5.0 || cells.empty()) {
      cells.emplace_back(pool_e, pool_o);
    } else {
      auto smallest = std::min_element(cells.begin(), cells.end());
      smallest->first += pool_e;
      smallest->second += pool_o;
    }
  }
  if (cells.size() < 2) throw InputError("stationarity: too few samples for the χ² test");
  for (const auto& [e, o] : cells) r.chi2 += (o - e) * (o - e) / e;
  r.chi2_dof = static_cast<int>(cells.size()) - 1;
  const boost::math::chi_squared_distribution<double> dist(r.chi2_dof);
  r.chi2_p_value = boost::math::cdf(boost::math::complement(dist, r.chi2));

  std::vector<double> u;
  u.reserve(samples.size());
  for (const GroupPoint& s : samples) u.push_back(s.theta() / kTwoPi);
  std::sort(u.begin(), u.end());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double hi = static_cast<double>(i + 1) / n - u[i];
    const double lo = u[i] - static_cast<double>(i) / n;
    r.ks_statistic = std::max({r.ks_statistic, hi, lo});
  }
  r.ks_p_value = kolmogorov_p_value(r.ks_statistic, samples.size());
  r.pass = r.chi2_p_value >= alpha && r.ks_p_value >= alpha;
  return r;
}

StationarityReport stationarity_test(const SimConfig& cfg, double burn_in, int n_samples,
                                     double alpha) {
  if (!(burn_in >= 0.0)) throw ConfigError("burn_in must be >= 0");
  if (n_samples < 1) throw ConfigError("n_samples must be >= 1");
  SimConfig run = cfg;
  run.initial_point.reset();
  run.n_paths = n_samples;
  if (burn_in == 0.0) {
    // Zero dynamics: the sampler's own draws, on the same per-path streams.
    const EquilibriumSampler sampler(cfg.potential);
    std::vector<GroupPoint> samples;
    samples.reserve(n_samples);
    for (int p = 0; p < n_samples; ++p) {
      Rng rng(stream_seed(cfg.seed, static_cast<std::uint64_t>(p)));
      samples.push_back(sampler.draw(rng));
    }
    return stationarity_statistics(cfg.potential, samples, alpha);
  }
  run.t_final = burn_in;
  run.sample_interval = burn_in;
  return stationarity_statistics(cfg.potential, simulate_endpoints(run), alpha);
}

// ---------------------------------------------------------------------------
// Autocovariance

ObservableSeries stationary_autocovariance(const SimConfig& cfg, const Observable& observable,
                                           const AutocovarianceOptions& opts) {
  SimConfig run = cfg;
  run.initial_point.reset();
  run.t_final = std::max(opts.t_total, cfg.dt);
  run.sample_interval = opts.lag_step;
  run.validate();
  if (opts.batches < 2) throw ConfigError("autocovariance: batches must be >= 2");
  const EquilibriumSampler sampler(run.potential);

  Rng rng(stream_seed(run.seed, 0));
  std::normal_distribution<double> normal;
  GroupPoint state = sampler.draw(rng);
  const long burn_steps = std::llround(opts.burn_in / run.dt);
  for (long s = 0; s < burn_steps; ++s) state = step(state, run, normal(rng));

  const int every = run.record_every();
  const long steps = run.steps();
  std::vector<double> x;
  x.reserve(static_cast<std::size_t>(steps / every + 1));
  x.push_back(observable(state));
  for (long s = 1; s <= steps; ++s) {
    state = step(state, run, normal(rng));
    if (s % every == 0) x.push_back(observable(state));
  }
  const double lag_dt = every * run.dt;
  const int lags = static_cast<int>(std::llround(opts.max_lag / lag_dt));
  const std::size_t n = x.size();
  const std::size_t batch_len = n / static_cast<std::size_t>(opts.batches);
  if (batch_len <= static_cast<std::size_t>(lags) + 1) {
    throw ConfigError("autocovariance: trajectory too short for max_lag and batches");
  }
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  for (double& v : x) v -= mean;

  auto covariance = [&](std::size_t begin, std::size_t end, int lag) {
    double s = 0.0;
    for (std::size_t i = begin; i + lag < end; ++i) s += x[i] * x[i + lag];
    return s / static_cast<double>(end - begin - lag);
  };
  ObservableSeries out;
  for (int k = 0; k <= lags; ++k) {
    Moments batch;
    for (int b = 0; b < opts.batches; ++b) {
      batch.add(covariance(b * batch_len, (b + 1) * batch_len, k));
    }
    out.times.push_back(k * lag_dt);
    out.values.push_back(covariance(0, n, k));
    out.stderr_.push_back(std::sqrt(batch.m2 / (batch.n - 1.0) / batch.n));
  }
  return out;
}

ObservableSeries ensemble_autocovariance(const SimConfig& cfg, const Observable& observable) {
  SimConfig run = cfg;
  run.initial_point.reset();
  run.validate();
  const EquilibriumSampler sampler(run.potential);
  const std::vector<double> times = record_times(run);
  const std::size_t records = times.size();

  struct Chunk {
    std::vector<CoMoments> moments;
    int aborted = 0;
  };
  auto chunks = run_chunks(run.n_paths, run.threads, [&](int begin, int end) {
    Chunk c;
    c.moments.resize(records);
    std::vector<double> buffer(records);
    for (int p = begin; p < end; ++p) {
      const bool ok = run_path(run, &sampler, static_cast<std::uint64_t>(p),
                               [&](int k, const GroupPoint& x) { buffer[k] = observable(x); });
      if (!ok) {
        ++c.aborted;
        continue;
      }
      for (std::size_t k = 0; k < records; ++k) c.moments[k].add(buffer[0], buffer[k]);
    }
    return c;
  });
  std::vector<CoMoments> total(records);
  int aborted = 0;
  for (const Chunk& c : chunks) {
    aborted += c.aborted;
    for (std::size_t k = 0; k < records; ++k) total[k].merge(c.moments[k]);
  }
  check_aborted(aborted, run.n_paths);

  ObservableSeries out;
  out.times = times;
  for (const CoMoments& m : total) {
    const double cov = m.n > 1.0 ? m.cxy / (m.n - 1.0) : 0.0;
    // Var of the centred product under a Gaussian approximation: σx²σy² + cov².
    const double vx = m.n > 1.0 ? m.m2x / (m.n - 1.0) : 0.0;
    const double vy = m.n > 1.0 ? m.m2y / (m.n - 1.0) : 0.0;
    out.values.push_back(cov);
    out.stderr_.push_back(m.n > 0.0 ? std::sqrt((vx * vy + cov * cov) / m.n) : 0.0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fits

namespace {

std::vector<std::size_t> window_indices(const ObservableSeries& series, FitWindow w) {
  series.validate();
  if (!(w.t_max > w.t_min)) throw FitError("fit window must have t_max > t_min");
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (series.times[i] >= w.t_min - 1e-12 && series.times[i] <= w.t_max + 1e-12) idx.push_back(i);
  }
  if (idx.size() < 5) {
    throw FitError(fmt::format("fit window [{}, {}] holds {} points; at least 5 required", w.t_min,
                               w.t_max, idx.size()));
  }
  return idx;
}

}  // namespace

DecayFit decay_rate_fit(const ObservableSeries& series, FitWindow window, double limit) {
  const auto idx = window_indices(series, window);
  std::vector<double> t, y;
  for (std::size_t i : idx) {
    const double v = std::abs(series.values[i] - limit);
    if (!(v > 0.0)) {
      throw FitError(fmt::format("nonpositive |value - limit| at t = {}", series.times[i]));
    }
    t.push_back(series.times[i]);
    y.push_back(std::log(v));
  }
  const double n = static_cast<double>(t.size());
  double mt = 0.0, my = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    mt += t[i];
    my += y[i];
  }
  mt /= n;
  my /= n;
  double stt = 0.0, sty = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    stt += (t[i] - mt) * (t[i] - mt);
    sty += (t[i] - mt) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  DecayFit f;
  f.rate = -sty / stt;
  f.r_squared = syy > 0.0 ? sty * sty / (stt * syy) : 1.0;
  f.points = static_cast<int>(t.size());
  return f;
}

OscillationFit damped_oscillation_fit(const ObservableSeries& series, FitWindow window) {
  const auto idx = window_indices(series, window);
  const double spacing = series.times[idx[1]] - series.times[idx[0]];
  for (std::size_t k = 1; k < idx.size(); ++k) {
    const double d = series.times[idx[k]] - series.times[idx[k - 1]];
    if (std::abs(d - spacing) > 1e-9 * std::max(1.0, spacing)) {
      throw FitError("oscillation fit needs equally spaced samples");
    }
  }
  const Eigen::Index rows = static_cast<Eigen::Index>(idx.size()) - 2;
  Eigen::MatrixXd a(rows, 2);
  Eigen::VectorXd b(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    a(r, 0) = series.values[idx[r + 1]];
    a(r, 1) = series.values[idx[r]];
    b(r) = series.values[idx[r + 2]];
  }
  const Eigen::Vector2d coef = a.colPivHouseholderQr().solve(b);
  // z² − p z − q = 0 for c_{n+2} = p c_{n+1} + q c_n.
  const double p = coef(0), q = coef(1);
  const double disc = p * p + 4.0 * q;
  std::complex<double> z;
  if (disc < 0.0) {
    z = {p / 2.0, std::sqrt(-disc) / 2.0};
  } else {
    const double r1 = (p + std::sqrt(disc)) / 2.0, r2 = (p - std::sqrt(disc)) / 2.0;
    z = std::abs(r1) >= std::abs(r2) ? r1 : r2;
  }
  if (!(std::abs(z) < 1.0) || std::abs(z) == 0.0) {
    throw FitError(fmt::format("oscillation fit: root modulus {} does not describe decay", std::abs(z)));
  }
  OscillationFit f;
  f.root = z;
  f.rate = -std::log(std::abs(z)) / spacing;
  f.omega = std::abs(std::arg(z)) / spacing;
  f.points = static_cast<int>(idx.size());
  const Eigen::VectorXd resid = b - a * coef;
  const double ss_tot = (b.array() - b.mean()).square().sum();
  f.r_squared = ss_tot > 0.0 ? 1.0 - resid.squaredNorm() / ss_tot : 1.0;
  return f;
}

// ---------------------------------------------------------------------------
// Output

void write_series_csv(const std::filesystem::path& path, const ObservableSeries& series) {
  series.validate();
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "t,mean,stderr\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    out << fmt::format("{:.17g},{:.17g},{:.17g}\n", series.times[i], series.values[i],
                       series.stderr_[i]);
  }
}

void write_trajectory_csv(const std::filesystem::path& path, const SimConfig& cfg, int n_paths,
                          std::size_t max_rows) {
  cfg.validate();
  const std::size_t records = record_times(cfg).size();
  const std::size_t rows = records * static_cast<std::size_t>(std::max(0, n_paths));
  if (rows > max_rows) {
    throw InputError(fmt::format("trajectory dump of {} rows exceeds the limit {}", rows, max_rows));
  }
  const auto sampler = make_sampler(cfg);
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "t,xi1,xi2,theta,path_id\n";
  const double spacing = cfg.record_every() * cfg.dt;
  for (int p = 0; p < n_paths; ++p) {
    run_path(cfg, sampler ? &*sampler : nullptr, static_cast<std::uint64_t>(p),
             [&](int k, const GroupPoint& x) {
               out << fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{}\n", k * spacing, x.xi1(),
                                  x.xi2(), x.theta(), p);
             });
  }
}

}  // namespace se2hypo
