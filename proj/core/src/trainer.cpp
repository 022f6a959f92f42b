#include "perfgat/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "perfgat/errors.hpp"
#include "perfgat/parallel.hpp"
#include "perfgat/rng.hpp"

namespace perfgat::train {

void TrainConfig::validate() const {
  const auto fail = [](const std::string& key, const std::string& why) {
    throw ConfigError("train." + key + ": " + why);
  };
  if (max_epochs < 1) fail("max_epochs", "must be >= 1");
  if (early_stop_patience < 1) fail("early_stop_patience", "must be >= 1");
  if (retrain_epochs < 1) fail("retrain_epochs", "must be >= 1");
  if (batch_size < 1) fail("batch_size", "must be >= 1");
  if (!(learning_rate >= 0.0)) fail("learning_rate", "must be >= 0");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0)) fail("adam_beta1", "must lie in (0,1)");
  if (!(adam_beta2 > 0.0 && adam_beta2 < 1.0)) fail("adam_beta2", "must lie in (0,1)");
  if (!(adam_eps > 0.0)) fail("adam_eps", "must be > 0");
  const double sum = split_ratios[0] + split_ratios[1] + split_ratios[2];
  if (std::abs(sum - 1.0) > 1e-9) fail("split_ratios", "must sum to 1");
  for (double r : split_ratios) {
    if (!(r > 0.0)) fail("split_ratios", "each ratio must be > 0");
  }
  if (!(decision_threshold >= 0.0 && decision_threshold <= 1.0)) {
    fail("decision_threshold", "must lie in [0,1]");
  }
}

std::vector<Subject> prepare_subjects(const std::vector<synth::LabeledVolume>& cohort,
                                      double tau, std::size_t k, bool use_abs) {
  std::vector<Subject> out(cohort.size());
  parallel_for(cohort.size(), [&](std::size_t i) {
    out[i].g = graph::build_graphs(cohort[i], tau, k, use_abs);
    out[i].patch = cohort[i].tumor_patch;
    out[i].label = cohort[i].label;
  });
  return out;
}

namespace {

// Largest-remainder apportionment of n into the three ratios.
std::array<std::size_t, 3> apportion(std::size_t n, const std::array<double, 3>& ratios) {
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> frac{};
  std::size_t assigned = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    const double exact = ratios[s] * static_cast<double>(n);
    counts[s] = static_cast<std::size_t>(std::floor(exact));
    frac[s] = exact - std::floor(exact);
    assigned += counts[s];
  }
  std::array<std::size_t, 3> order = {0, 1, 2};
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return frac[a] != frac[b] ? frac[a] > frac[b] : a < b;
  });
  for (std::size_t t = 0; assigned < n; ++t, ++assigned) counts[order[t % 3]] += 1;
  return counts;
}

}  // namespace

SplitIndices split_dataset(const std::vector<int>& labels,
                           const std::array<double, 3>& ratios, std::uint64_t seed) {
  if (labels.size() < 10) throw DomainError("split_dataset needs at least 10 subjects");
  const double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9) throw DomainError("split_dataset ratios must sum to 1");

  std::vector<std::size_t> minority, majority;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    (labels[i] == 1 ? minority : majority).push_back(i);
  }
  if (minority.size() < 3) {
    throw DomainError("split_dataset: need >= 3 minority samples to stratify, have " +
                      std::to_string(minority.size()));
  }

  Rng rng(mix_seed(seed, rng_stream::kSplit));
  rng.shuffle(minority);
  rng.shuffle(majority);

  SplitIndices out;
  for (const std::vector<std::size_t>* cls : {&minority, &majority}) {
    std::array<std::size_t, 3> counts = apportion(cls->size(), ratios);
    // Every split gets a minority sample where arithmetically possible.
    if (cls == &minority) {
      for (std::size_t s = 0; s < 3; ++s) {
        if (counts[s] == 0 && cls->size() >= 3) {
          const std::size_t donor = static_cast<std::size_t>(
              std::max_element(counts.begin(), counts.end()) - counts.begin());
          counts[donor] -= 1;
          counts[s] += 1;
        }
      }
    }
    std::size_t pos = 0;
    for (std::size_t i = 0; i < counts[0]; ++i) out.train.push_back((*cls)[pos++]);
    for (std::size_t i = 0; i < counts[1]; ++i) out.val.push_back((*cls)[pos++]);
    for (std::size_t i = 0; i < counts[2]; ++i) out.test.push_back((*cls)[pos++]);
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

namespace {

AdamState zero_adam(const model::ModelParams& params) {
  AdamState st;
  for (const auto& [name, tensor] : model::named_tensors(params)) {
    st.m.emplace_back(tensor->rows(), tensor->cols());
    st.v.emplace_back(tensor->rows(), tensor->cols());
  }
  return st;
}

void adam_step(std::vector<std::pair<std::string, num::Matrix*>>& tensors,
               const std::vector<num::Matrix>& grads, AdamState& st,
               const TrainConfig& cfg) {
  st.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(st.step));
  for (std::size_t p = 0; p < tensors.size(); ++p) {
    num::Matrix& theta = *tensors[p].second;
    const num::Matrix& g = grads[p];
    num::Matrix& m = st.m[p];
    num::Matrix& v = st.v[p];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double gi = g.data()[i];
      m.data()[i] = cfg.adam_beta1 * m.data()[i] + (1.0 - cfg.adam_beta1) * gi;
      v.data()[i] = cfg.adam_beta2 * v.data()[i] + (1.0 - cfg.adam_beta2) * gi * gi;
      const double mhat = m.data()[i] / bc1;
      const double vhat = v.data()[i] / bc2;
      theta.data()[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
  }
}

double mean_validation_loss(const model::ModelParams& params,
                            const std::vector<Subject>& val_set) {
  std::vector<double> losses(val_set.size());
  parallel_for(val_set.size(), [&](std::size_t i) {
    num::GradTape tape;
    const model::ModelVars vars = model::bind(tape, params, /*trainable=*/false);
    const model::SampleForward fwd =
        model::forward_sample(tape, vars, params.cfg, val_set[i].g, val_set[i].patch,
                              val_set[i].label);
    losses[i] = tape.value(fwd.loss)(0, 0);
  });
  double sum = 0.0;
  for (double l : losses) sum += l;
  return sum / static_cast<double>(val_set.size());
}

}  // namespace

TrainResult train(const model::ModelParams& init, const std::vector<Subject>& train_set,
                  const std::vector<Subject>& val_set, const TrainConfig& cfg,
                  const TrainState* resume) {
  cfg.validate();
  if (train_set.empty() || val_set.empty()) {
    throw DomainError("train: empty train or validation set");
  }

  TrainState st;
  if (resume) {
    st = *resume;
  } else {
    st.current = init;
    st.best = init;
    st.adam = zero_adam(init);
  }

  TrainResult res;
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = st.epochs_done; epoch < cfg.max_epochs && !st.stopped_early;
       ++epoch) {
    Rng shuffle_rng(mix_seed(cfg.seed, rng_stream::kEpochBase + epoch));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle_rng.shuffle(order);

    auto tensors = model::named_tensors(st.current);
    double epoch_loss = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::size_t bsize = end - start;
      std::vector<std::vector<num::Matrix>> grads(bsize);
      std::vector<double> losses(bsize);
      parallel_for(bsize, [&](std::size_t b) {
        const Subject& s = train_set[order[start + b]];
        num::GradTape tape;
        const model::ModelVars vars = model::bind(tape, st.current, /*trainable=*/true);
        const model::SampleForward fwd =
            model::forward_sample(tape, vars, st.current.cfg, s.g, s.patch, s.label);
        losses[b] = tape.value(fwd.loss)(0, 0);
        tape.backward(fwd.loss);
        grads[b] = model::collect_gradients(tape, vars, st.current);
      });
      for (std::size_t b = 0; b < bsize; ++b) {
        if (!std::isfinite(losses[b])) {
          throw NumericError("divergence: non-finite loss at epoch " +
                             std::to_string(epoch + 1) + " batch " +
                             std::to_string(batch_index));
        }
        epoch_loss += losses[b];
      }
      // Fixed-order reduction keeps the mean gradient bit-reproducible.
      std::vector<num::Matrix> mean = std::move(grads[0]);
      for (std::size_t b = 1; b < bsize; ++b) {
        for (std::size_t p = 0; p < mean.size(); ++p) {
          for (std::size_t i = 0; i < mean[p].size(); ++i) {
            mean[p].data()[i] += grads[b][p].data()[i];
          }
        }
      }
      const double inv = 1.0 / static_cast<double>(bsize);
      for (auto& g : mean) {
        for (double& x : g.data()) x *= inv;
      }
      adam_step(tensors, mean, st.adam, cfg);
    }

    const double val_loss = mean_validation_loss(st.current, val_set);
    if (!std::isfinite(val_loss)) {
      throw NumericError("divergence: non-finite validation loss at epoch " +
                         std::to_string(epoch + 1));
    }
    if (val_loss < st.best_val_loss) {
      st.best_val_loss = val_loss;
      st.best = st.current;
      st.epochs_since_best = 0;
    } else {
      st.epochs_since_best += 1;
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.train_loss = epoch_loss / static_cast<double>(train_set.size());
    rec.val_loss = val_loss;
    rec.best_val_loss = st.best_val_loss;
    rec.epochs_since_best = st.epochs_since_best;
    res.history.push_back(rec);

    st.epochs_done = epoch + 1;
    if (st.epochs_since_best >= cfg.early_stop_patience) st.stopped_early = true;
  }

  res.params = st.best;
  res.state = std::move(st);
  return res;
}

std::vector<fusion::SampleFeatures> recombine_augment(
    const std::vector<fusion::SampleFeatures>& minority, std::size_t target_count,
    std::uint64_t seed) {
  if (minority.size() < 2) {
    throw DomainError("recombine_augment needs >= 2 minority samples, have " +
                      std::to_string(minority.size()));
  }
  Rng rng(seed);
  std::vector<fusion::SampleFeatures> out;
  out.reserve(target_count);
  while (out.size() < target_count) {
    const std::size_t a = rng.index(minority.size());
    std::size_t b = rng.index(minority.size() - 1);
    if (b >= a) b += 1;  // distinct pair
    // (u_a, B_b) and (u_b, B_a); both carry the minority label.
    fusion::SampleFeatures aug1;
    aug1.u_tumor = minority[a].u_tumor;
    aug1.z_spatial = minority[b].z_spatial;
    aug1.z_temporal = minority[b].z_temporal;
    aug1.label = 1;
    out.push_back(std::move(aug1));
    if (out.size() >= target_count) break;
    fusion::SampleFeatures aug2;
    aug2.u_tumor = minority[b].u_tumor;
    aug2.z_spatial = minority[a].z_spatial;
    aug2.z_temporal = minority[a].z_temporal;
    aug2.label = 1;
    out.push_back(std::move(aug2));
  }
  return out;
}

RetrainResult retrain_classifier(const model::ModelParams& trained,
                                 const std::vector<Subject>& train_set,
                                 const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.empty()) throw DomainError("retrain_classifier: empty train set");

  // Cache encoder outputs once; the encoders stay frozen below.
  std::vector<fusion::SampleFeatures> features(train_set.size());
  parallel_for(train_set.size(), [&](std::size_t i) {
    features[i] = model::extract_features(trained, train_set[i].g, train_set[i].patch,
                                          train_set[i].label);
  });

  std::vector<fusion::SampleFeatures> minority;
  std::size_t majority_count = 0;
  for (const auto& f : features) {
    if (f.label == 1) {
      minority.push_back(f);
    } else {
      ++majority_count;
    }
  }
  RetrainResult res;
  if (majority_count > minority.size()) {
    const std::size_t target = majority_count - minority.size();
    std::vector<fusion::SampleFeatures> aug =
        recombine_augment(minority, target, mix_seed(cfg.seed, rng_stream::kAugment));
    res.augmented_count = aug.size();
    for (auto& f : aug) features.push_back(std::move(f));
  }

  res.params = trained;
  model::reinit_fusion(res.params, cfg.seed);

  // Adam over the fusion tensors only.
  std::vector<std::pair<std::string, num::Matrix*>> tensors;
  for (auto& [name, tensor] : model::named_tensors(res.params)) {
    if (model::is_fusion_tensor(name)) tensors.emplace_back(name, tensor);
  }
  AdamState adam;
  for (const auto& [name, tensor] : tensors) {
    adam.m.emplace_back(tensor->rows(), tensor->cols());
    adam.v.emplace_back(tensor->rows(), tensor->cols());
  }

  std::vector<std::size_t> order(features.size());
  for (std::size_t epoch = 0; epoch < cfg.retrain_epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(cfg.seed, rng_stream::kEpochBase + 500000 + epoch));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::size_t bsize = end - start;
      std::vector<std::vector<num::Matrix>> grads(bsize);
      std::vector<double> losses(bsize);
      parallel_for(bsize, [&](std::size_t b) {
        num::GradTape tape;
        fusion::FusionVars vars{tape.param(res.params.fusion.w_node_proj),
                                tape.param(res.params.fusion.b_node_proj),
                                tape.param(res.params.fusion.w_tumor_proj),
                                tape.param(res.params.fusion.b_tumor_proj),
                                tape.param(res.params.fusion.w_sem),
                                tape.param(res.params.fusion.b_sem),
                                tape.param(res.params.fusion.q),
                                tape.param(res.params.fusion.w_head),
                                tape.param(res.params.fusion.b_head)};
        const num::Var loss = model::features_loss(tape, vars, features[order[start + b]]);
        losses[b] = tape.value(loss)(0, 0);
        tape.backward(loss);
        grads[b] = {tape.grad(vars.w_node_proj), tape.grad(vars.b_node_proj),
                    tape.grad(vars.w_tumor_proj), tape.grad(vars.b_tumor_proj),
                    tape.grad(vars.w_sem), tape.grad(vars.b_sem), tape.grad(vars.q),
                    tape.grad(vars.w_head), tape.grad(vars.b_head)};
      });
      for (std::size_t b = 0; b < bsize; ++b) {
        if (!std::isfinite(losses[b])) {
          throw NumericError("divergence: non-finite loss in retraining at epoch " +
                             std::to_string(epoch + 1) + " batch " +
                             std::to_string(batch_index));
        }
        epoch_loss += losses[b];
      }
      std::vector<num::Matrix> mean = std::move(grads[0]);
      for (std::size_t b = 1; b < bsize; ++b) {
        for (std::size_t p = 0; p < mean.size(); ++p) {
          for (std::size_t i = 0; i < mean[p].size(); ++i) {
            mean[p].data()[i] += grads[b][p].data()[i];
          }
        }
      }
      const double inv = 1.0 / static_cast<double>(bsize);
      for (auto& g : mean) {
        for (double& x : g.data()) x *= inv;
      }
      adam_step(tensors, mean, adam, cfg);
    }
    res.loss_history.push_back(epoch_loss / static_cast<double>(features.size()));
  }
  return res;
}

std::vector<double> score_subjects(const model::ModelParams& params,
                                   const std::vector<Subject>& subjects) {
  std::vector<double> scores(subjects.size());
  parallel_for(subjects.size(), [&](std::size_t i) {
    num::GradTape tape;
    const model::ModelVars vars = model::bind(tape, params, /*trainable=*/false);
    const model::SampleForward fwd = model::forward_sample(
        tape, vars, params.cfg, subjects[i].g, subjects[i].patch, subjects[i].label);
    scores[i] = fwd.prob_minority;
  });
  return scores;
}

MetricsReport evaluate(const model::ModelParams& params,
                       const std::vector<Subject>& subjects, double threshold) {
  std::vector<int> labels;
  labels.reserve(subjects.size());
  for (const Subject& s : subjects) labels.push_back(s.label);
  return compute_metrics(labels, score_subjects(params, subjects), threshold);
}

}  // namespace perfgat::train
