#pragma once

#include <cstdint>
#include <vector>

#include "perfgat/geometry.hpp"
#include "perfgat/matrix.hpp"

namespace perfgat::synth {

// Small dense 4D tensor (p x p x p x T), row-major with time fastest.
class Tensor4 {
 public:
  Tensor4() = default;
  Tensor4(std::size_t p, std::size_t t)
      : p_(p), t_(t), data_(p * p * p * t, 0.0) {}

  std::size_t patch() const { return p_; }
  std::size_t timepoints() const { return t_; }
  std::size_t voxels() const { return p_ * p_ * p_; }
  std::size_t size() const { return data_.size(); }

  double& at(std::size_t x, std::size_t y, std::size_t z, std::size_t tt) {
    return data_[((x * p_ + y) * p_ + z) * t_ + tt];
  }
  double at(std::size_t x, std::size_t y, std::size_t z, std::size_t tt) const {
    return data_[((x * p_ + y) * p_ + z) * t_ + tt];
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  // Mean over the spatial voxels at each timepoint.
  num::Vector temporal_mean() const;

  friend bool operator==(const Tensor4& a, const Tensor4& b) {
    return a.p_ == b.p_ && a.t_ == b.t_ && a.data_ == b.data_;
  }

 private:
  std::size_t p_ = 0;
  std::size_t t_ = 0;
  std::vector<double> data_;
};

// Bolus kinetics of the synthetic curves: signal drop of gamma-variate shape
// on a flat baseline.
struct KineticsConfig {
  double baseline = 100.0;
  double arrival_min = 3.0;   // bolus arrival window (timepoints)
  double arrival_max = 8.0;
  double shape_min = 1.5;     // gamma shape range
  double shape_max = 3.0;
  double rate_min = 1.0;      // gamma rate range
  double rate_max = 2.5;
  double dip_min = 20.0;      // peak signal drop range
  double dip_max = 40.0;
  double noise_sigma = 1.0;
};

struct CohortConfig {
  std::size_t n_subjects = 444;
  std::size_t n_regions = 16;     // N, excluding the tumor node
  std::size_t n_timepoints = 40;  // T
  double minority_fraction = 0.068;
  double class_effect = 0.8;  // multiplicative dip perturbation on minority
  std::size_t patch_size = 4;
  std::uint64_t seed = 42;
  KineticsConfig kinetics;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

// One synthetic subject: parcellated region curves, a tumor voxel patch and
// the binary genotype label (1 = minority).
struct LabeledVolume {
  num::Matrix region_series;            // N x T
  std::vector<Point3> region_centroids; // N
  num::Vector tumor_series;             // T, mean of the tumor patch
  Tensor4 tumor_patch;                  // p x p x p x T
  Point3 tumor_centroid;
  int label = 0;
};

// Per-region kinetic parameters actually sampled for one subject; exposed so
// tests can recompute noise-free curves independently.
struct SubjectTrace {
  struct CurveParams {
    double t0, shape, rate, amplitude, baseline;
  };
  std::vector<CurveParams> regions;  // N entries
  std::vector<CurveParams> voxels;   // p^3 entries
  std::uint64_t subject_seed = 0;
};

struct CohortTrace {
  std::vector<SubjectTrace> subjects;
  std::vector<std::size_t> tumor_adjacent;  // regions carrying the class effect
};

// curve[t] = baseline - amplitude*(t-t0)^shape * exp(-(t-t0)/rate) for t>t0,
// baseline otherwise. Throws DomainError on non-positive shape/rate.
num::Vector gamma_variate_curve(double t0, double alpha_shape, double beta_rate,
                                double amplitude, double baseline, std::size_t T);

// Deterministic synthetic cohort. Exactly round(minority_fraction*n_subjects)
// subjects carry label 1 and have their tumor plus the 3 regions nearest the
// tumor centroid perturbed by class_effect.
std::vector<LabeledVolume> generate_cohort(const CohortConfig& cfg,
                                           CohortTrace* trace = nullptr);

std::size_t minority_count(const CohortConfig& cfg);

}  // namespace perfgat::synth
