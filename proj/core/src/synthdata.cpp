#include "perfgat/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "perfgat/errors.hpp"
#include "perfgat/rng.hpp"

namespace perfgat::synth {

num::Vector Tensor4::temporal_mean() const {
  num::Vector mean(t_);
  const std::size_t nv = voxels();
  for (std::size_t v = 0; v < nv; ++v) {
    for (std::size_t tt = 0; tt < t_; ++tt) mean[tt] += data_[v * t_ + tt];
  }
  for (std::size_t tt = 0; tt < t_; ++tt) mean[tt] /= static_cast<double>(nv);
  return mean;
}

void CohortConfig::validate() const {
  const auto fail = [](const std::string& key, const std::string& why) {
    throw ConfigError("cohort." + key + ": " + why);
  };
  if (n_subjects < 10) fail("n_subjects", "must be >= 10");
  if (n_regions < 4) fail("n_regions", "must be >= 4");
  if (n_timepoints < 8) fail("n_timepoints", "must be >= 8");
  if (!(minority_fraction > 0.0 && minority_fraction < 1.0)) {
    fail("minority_fraction", "must lie in (0,1)");
  }
  if (minority_fraction * static_cast<double>(n_subjects) < 2.0) {
    fail("minority_fraction", "minority_fraction * n_subjects must be >= 2");
  }
  if (patch_size < 1) fail("patch_size", "must be >= 1");
  if (class_effect < 0.0) fail("class_effect", "must be >= 0");
  if (!(kinetics.shape_min > 0.0 && kinetics.shape_max >= kinetics.shape_min)) {
    fail("kinetics.shape", "range must be positive and ordered");
  }
  if (!(kinetics.rate_min > 0.0 && kinetics.rate_max >= kinetics.rate_min)) {
    fail("kinetics.rate", "range must be positive and ordered");
  }
  if (!(kinetics.dip_min > 0.0 && kinetics.dip_max >= kinetics.dip_min)) {
    fail("kinetics.dip", "range must be positive and ordered");
  }
  if (!(kinetics.arrival_min >= 0.0 && kinetics.arrival_max >= kinetics.arrival_min)) {
    fail("kinetics.arrival", "window must be ordered and non-negative");
  }
  if (kinetics.arrival_max + 2.0 >= static_cast<double>(n_timepoints)) {
    fail("kinetics.arrival_max", "bolus must arrive at least 2 timepoints before T");
  }
  if (kinetics.noise_sigma < 0.0) fail("kinetics.noise_sigma", "must be >= 0");
}

num::Vector gamma_variate_curve(double t0, double alpha_shape, double beta_rate,
                                double amplitude, double baseline, std::size_t T) {
  if (!(alpha_shape > 0.0)) {
    throw DomainError("gamma_variate_curve: shape must be positive, got " +
                      std::to_string(alpha_shape));
  }
  if (!(beta_rate > 0.0)) {
    throw DomainError("gamma_variate_curve: rate must be positive, got " +
                      std::to_string(beta_rate));
  }
  num::Vector curve(T);
  for (std::size_t t = 0; t < T; ++t) {
    const double dt = static_cast<double>(t) - t0;
    if (dt > 0.0) {
      curve[t] = baseline -
                 amplitude * std::pow(dt, alpha_shape) * std::exp(-dt / beta_rate);
    } else {
      curve[t] = baseline;
    }
  }
  num::require_finite(curve.data(), "gamma_variate_curve output");
  return curve;
}

std::size_t minority_count(const CohortConfig& cfg) {
  return static_cast<std::size_t>(
      std::llround(cfg.minority_fraction * static_cast<double>(cfg.n_subjects)));
}

namespace {

// Peak height of (t-t0)^a exp(-(t-t0)/b), reached at t-t0 = a*b. Dividing the
// desired dip by this turns "dip depth" into the curve amplitude.
double gamma_peak_factor(double shape, double rate) {
  return std::pow(shape * rate, shape) * std::exp(-shape);
}

struct SampledCurve {
  SubjectTrace::CurveParams params;
  num::Vector values;
};

SampledCurve sample_curve(Rng& rng, const KineticsConfig& kin, double t0_subject,
                          double dip_scale, std::size_t T) {
  SubjectTrace::CurveParams p{};
  // Small per-curve arrival jitter on top of the shared subject arrival keeps
  // region curves correlated but not identical.
  p.t0 = t0_subject + rng.uniform(-0.5, 0.5);
  p.shape = rng.uniform(kin.shape_min, kin.shape_max);
  p.rate = rng.uniform(kin.rate_min, kin.rate_max);
  p.baseline = kin.baseline;
  const double dip = rng.uniform(kin.dip_min, kin.dip_max) * dip_scale;
  p.amplitude = dip / gamma_peak_factor(p.shape, p.rate);
  num::Vector curve = gamma_variate_curve(p.t0, p.shape, p.rate, p.amplitude, p.baseline, T);
  if (kin.noise_sigma > 0.0) {
    for (std::size_t t = 0; t < T; ++t) curve[t] += kin.noise_sigma * rng.normal();
  }
  return {p, std::move(curve)};
}

}  // namespace

std::vector<LabeledVolume> generate_cohort(const CohortConfig& cfg, CohortTrace* trace) {
  cfg.validate();
  const std::size_t N = cfg.n_regions;
  const std::size_t T = cfg.n_timepoints;
  const std::size_t P = cfg.patch_size;

  // Cohort-level geometry, fixed across subjects.
  Rng geo(mix_seed(cfg.seed, rng_stream::kCentroids));
  std::vector<Point3> centroids(N);
  for (Point3& c : centroids) c = {geo.uniform(), geo.uniform(), geo.uniform()};
  const Point3 tumor_centroid{geo.uniform(), geo.uniform(), geo.uniform()};

  // The 3 regions nearest the tumor carry the class effect.
  std::vector<std::size_t> order(N);
  for (std::size_t i = 0; i < N; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double da = squared_distance(centroids[a], tumor_centroid);
    const double db = squared_distance(centroids[b], tumor_centroid);
    return da != db ? da < db : a < b;
  });
  std::vector<std::size_t> tumor_adjacent(order.begin(),
                                          order.begin() + std::min<std::size_t>(3, N));

  // Exact minority count at shuffled positions.
  const std::size_t n_min = minority_count(cfg);
  std::vector<int> labels(cfg.n_subjects, 0);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n_min), 1);
  Rng lab(mix_seed(cfg.seed, rng_stream::kLabels));
  lab.shuffle(labels);

  std::vector<bool> is_adjacent(N, false);
  for (std::size_t r : tumor_adjacent) is_adjacent[r] = true;

  std::vector<LabeledVolume> cohort;
  cohort.reserve(cfg.n_subjects);
  if (trace) {
    trace->subjects.clear();
    trace->tumor_adjacent = tumor_adjacent;
  }

  for (std::size_t s = 0; s < cfg.n_subjects; ++s) {
    const std::uint64_t subject_seed = mix_seed(cfg.seed, rng_stream::kSubjectBase + s);
    Rng rng(subject_seed);
    LabeledVolume v;
    v.label = labels[s];
    v.region_centroids = centroids;
    v.tumor_centroid = tumor_centroid;
    v.region_series = num::Matrix(N, T);
    SubjectTrace st;
    st.subject_seed = subject_seed;

    const double t0_subject = rng.uniform(cfg.kinetics.arrival_min, cfg.kinetics.arrival_max);
    const double effect = v.label == 1 ? 1.0 + cfg.class_effect : 1.0;

    for (std::size_t r = 0; r < N; ++r) {
      const double dip_scale = is_adjacent[r] ? effect : 1.0;
      SampledCurve c = sample_curve(rng, cfg.kinetics, t0_subject, dip_scale, T);
      for (std::size_t t = 0; t < T; ++t) v.region_series(r, t) = c.values[t];
      st.regions.push_back(c.params);
    }

    v.tumor_patch = Tensor4(P, T);
    const std::size_t nv = v.tumor_patch.voxels();
    for (std::size_t vox = 0; vox < nv; ++vox) {
      SampledCurve c = sample_curve(rng, cfg.kinetics, t0_subject, effect, T);
      std::copy(c.values.data().begin(), c.values.data().end(),
                v.tumor_patch.data().begin() + static_cast<std::ptrdiff_t>(vox * T));
      st.voxels.push_back(c.params);
    }
    v.tumor_series = v.tumor_patch.temporal_mean();

    if (trace) trace->subjects.push_back(std::move(st));
    cohort.push_back(std::move(v));
  }
  return cohort;
}

}  // namespace perfgat::synth
