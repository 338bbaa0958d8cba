#include "pevlm/trace.hpp"

#include <stdexcept>

namespace pevlm {

std::vector<double> moving_average(const std::vector<double>& raw,
                                   std::size_t window) {
  if (window < 1) throw std::invalid_argument("window must be >= 1");
  if (window > raw.size()) {
    throw std::invalid_argument("window exceeds trace length");
  }
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const std::size_t begin = i + 1 >= window ? i + 1 - window : 0;
    double sum = 0.0;
    for (std::size_t j = begin; j <= i; ++j) sum += raw[j];
    out[i] = sum / static_cast<double>(i - begin + 1);
  }
  return out;
}

AttnTrace build_trace(const MatrixT<double>& weights,
                      const BlockPartition& part, std::size_t window) {
  const std::size_t num_queries = weights.rows();
  const std::size_t num_keys = weights.cols();
  if (num_queries == 0) throw std::invalid_argument("trace needs >= 1 query");

  AttnTrace trace;
  trace.num_queries = num_queries;
  trace.window = window;
  trace.mean_weight.assign(num_keys, 0.0);
  for (std::size_t q = 0; q < num_queries; ++q) {
    for (std::size_t k = 0; k < num_keys; ++k) {
      trace.mean_weight[k] += weights.at(q, k);
      trace.total_mass += weights.at(q, k);
    }
  }
  for (double& v : trace.mean_weight) v /= static_cast<double>(num_queries);

  trace.moving_avg = moving_average(trace.mean_weight, window);

  trace.segment.resize(num_keys);
  for (std::size_t k = 0; k < num_keys; ++k) {
    if (part.sink.contains(k)) {
      trace.segment[k] = "sink";
    } else if (part.question.contains(k)) {
      trace.segment[k] = "question";
    } else {
      trace.segment[k] = "video";
      for (std::size_t i = 0; i < part.context_blocks.size(); ++i) {
        if (part.context_blocks[i].contains(k)) {
          trace.segment[k] = "block" + std::to_string(i);
          break;
        }
      }
    }
  }
  return trace;
}

}  // namespace pevlm
