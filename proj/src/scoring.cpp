#include "recall/scoring.hpp"

#include "recall/errors.hpp"

namespace recall {

SequenceLL sequence_ll(const TokenScores& scores) {
  if (scores.logprobs.empty())
    throw DataError("sequence_ll: empty token scores");
  SequenceLL out;
  out.token_count = scores.logprobs.size();
  double sum = 0.0;
  for (const double lp : scores.logprobs) sum += lp;
  out.sum_ll = sum;
  out.mean_ll = sum / static_cast<double>(out.token_count);
  return out;
}

}  // namespace recall
