#include "coclust/skipgram.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "coclust/error.hpp"

namespace coclust {

namespace {

// log(1 + exp(-x)) without overflow.
double softplus_neg(double x) {
  return x > 0.0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

double logistic(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

SkipGramResult train_skipgram(const WalkCorpus& corpus, const std::vector<std::string>& vocab,
                              const SkipGramConfig& config) {
  if (config.dim < 1 || config.window < 1 || config.negatives < 1) {
    throw UsageError("train_skipgram: dim, window and negatives must be at least 1");
  }
  std::size_t tokens = 0;
  for (const auto& walk : corpus.walks) tokens += walk.size();
  if (tokens == 0) throw UsageError("train_skipgram: empty corpus");
  if (vocab.empty()) throw UsageError("train_skipgram: empty vocabulary");

  const std::size_t n = vocab.size(), dim = config.dim;
  std::vector<double> counts(n, 0.0);
  for (const auto& walk : corpus.walks) {
    for (std::size_t v : walk) {
      if (v >= n) throw UsageError("train_skipgram: walk references node outside vocabulary");
      counts[v] += 1.0;
    }
  }
  std::vector<double> noise_weights(n);
  for (std::size_t v = 0; v < n; ++v) noise_weights[v] = std::pow(counts[v], 0.75);

  std::mt19937_64 rng(config.seed);
  std::discrete_distribution<std::size_t> noise(noise_weights.begin(), noise_weights.end());
  std::uniform_real_distribution<double> init(-0.5 / static_cast<double>(dim),
                                              0.5 / static_cast<double>(dim));

  std::vector<double> input(n * dim), output(n * dim, 0.0), grad_center(dim);
  for (double& x : input) x = init(rng);

  // Only multi-node vocabularies can have negatives that differ from the context.
  const bool can_sample_negative =
      std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0.0; }) > 1;

  const double total_steps = static_cast<double>(config.epochs * tokens);
  double processed = 0.0;
  SkipGramResult result;

  auto update = [&](std::size_t center, std::size_t target, double label, double lr) {
    double* in = &input[center * dim];
    double* out = &output[target * dim];
    double dot = 0.0;
    for (std::size_t j = 0; j < dim; ++j) dot += in[j] * out[j];
    const double g = (label - logistic(dot)) * lr;
    for (std::size_t j = 0; j < dim; ++j) {
      grad_center[j] += g * out[j];
      out[j] += g * in[j];
    }
    return label == 1.0 ? softplus_neg(dot) : softplus_neg(-dot);
  };

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (const auto& walk : corpus.walks) {
      for (std::size_t pos = 0; pos < walk.size(); ++pos) {
        const double lr = config.learning_rate *
                          std::max(1e-4, 1.0 - processed / total_steps);
        processed += 1.0;
        const std::size_t center = walk[pos];
        const std::size_t lo = pos >= config.window ? pos - config.window : 0;
        const std::size_t hi = std::min(walk.size() - 1, pos + config.window);
        for (std::size_t c = lo; c <= hi; ++c) {
          const std::size_t context = walk[c];
          if (c == pos || context == center) continue;
          std::fill(grad_center.begin(), grad_center.end(), 0.0);
          double loss = update(center, context, 1.0, lr);
          if (can_sample_negative) {
            for (std::size_t k = 0; k < config.negatives; ++k) {
              std::size_t neg = noise(rng);
              while (neg == context) neg = noise(rng);
              loss += update(center, neg, 0.0, lr);
            }
          }
          double* in = &input[center * dim];
          for (std::size_t j = 0; j < dim; ++j) in[j] += grad_center[j];
          result.pair_losses.push_back(loss);
        }
      }
    }
  }

  result.table.vocab = vocab;
  result.table.matrix = Tensor::matrix(n, dim, std::move(input));
  result.table.source = EmbeddingSource::structural;
  return result;
}

}  // namespace coclust
