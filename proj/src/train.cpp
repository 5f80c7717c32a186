#include "attnshap/train.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "attnshap/rng.hpp"

namespace attnshap {

double cross_entropy(const std::vector<double>& probs, int label) {
  if (label < 0 || label >= static_cast<int>(probs.size())) {
    throw std::invalid_argument("cross_entropy: label out of range");
  }
  return -std::log(std::max(probs[label], 1e-300));
}

TrainStats train(TransformerModel& model, const Dataset& data, const TrainOptions& opt) {
  if (data.empty()) {
    throw std::invalid_argument("train: empty dataset");
  }
  if (opt.epochs < 0 || opt.batch_size < 1) {
    throw std::invalid_argument("train: bad options");
  }

  auto refs = model.tensors();
  std::vector<std::vector<double>> m1, m2;
  if (opt.use_adam) {
    m1.resize(refs.size());
    m2.resize(refs.size());
    for (std::size_t i = 0; i < refs.size(); ++i) {
      m1[i].assign(refs[i].size, 0.0);
      m2[i].assign(refs[i].size, 0.0);
    }
  }
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long step = 0;

  TrainStats stats;
  Rng shuffle_rng(mix_seed(opt.seed, fnv1a64("train.shuffle")));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  const int n_classes = model.config().n_classes;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    // Fisher-Yates with the portable generator.
    for (std::size_t i = order.size(); i > 1; --i) {
      std::size_t j = shuffle_rng.next_below(i);
      std::swap(order[i - 1], order[j]);
    }

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
      std::size_t end = std::min(order.size(), start + opt.batch_size);
      std::vector<std::vector<double>> batch_grads;
      for (std::size_t bi = start; bi < end; ++bi) {
        const LabeledSequence& ex = data[order[bi]];
        if (ex.label < 0 || ex.label >= n_classes) {
          throw std::invalid_argument("train: label out of range for sample " + ex.id);
        }
        ForwardTrace trace = model.forward(ex.x);
        loss_sum += cross_entropy(trace.probs, ex.label);

        std::vector<double> d_logits = trace.probs;
        d_logits[ex.label] -= 1.0;
        ParamGradients pg;
        model.backward(trace, d_logits, &pg);
        if (batch_grads.empty()) {
          batch_grads = std::move(pg.grads);
        } else {
          for (std::size_t t = 0; t < batch_grads.size(); ++t) {
            for (std::size_t i = 0; i < batch_grads[t].size(); ++i) {
              batch_grads[t][i] += pg.grads[t][i];
            }
          }
        }
      }

      const double inv_batch = 1.0 / static_cast<double>(end - start);
      ++step;
      for (std::size_t t = 0; t < refs.size(); ++t) {
        double* p = refs[t].data;
        for (std::size_t i = 0; i < refs[t].size; ++i) {
          double g = batch_grads[t][i] * inv_batch;
          if (opt.use_adam) {
            m1[t][i] = beta1 * m1[t][i] + (1.0 - beta1) * g;
            m2[t][i] = beta2 * m2[t][i] + (1.0 - beta2) * g * g;
            double mh = m1[t][i] / (1.0 - std::pow(beta1, step));
            double vh = m2[t][i] / (1.0 - std::pow(beta2, step));
            p[i] -= opt.lr * mh / (std::sqrt(vh) + eps);
          } else {
            p[i] -= opt.lr * g;
          }
        }
      }
    }
    stats.epoch_loss.push_back(loss_sum / static_cast<double>(data.size()));
  }

  stats.final_train_accuracy = accuracy(model, data);
  return stats;
}

double accuracy(const TransformerModel& model, const Dataset& data) {
  if (data.empty()) return 0.0;
  std::size_t hits = 0;
  for (const LabeledSequence& ex : data) {
    if (model.predict(ex.x).label == ex.label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

}  // namespace attnshap
