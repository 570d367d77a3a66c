#ifndef MPRT_LRP_H_
#define MPRT_LRP_H_

#include <cstddef>

#include "mprt/model.h"

namespace mprt {

enum class LrpRule {
  // R_j = sum_k a_j w_jk / (z_k + eps * sign(z_k)) R_k, z_k the pre-activation
  // including bias. The bias share of relevance is absorbed, not spread.
  kEpsilon,
  // Same propagation restricted to positive contributions
  // z+_jk = a+_j w+_jk + a-_j w-_jk.
  kZPlus,
};

// Places `relevance` on the output of layer `pos` and propagates it down to
// the model input. ReLU and Flatten pass relevance through, max-pooling
// routes it to the window winner, and residual sums split it in proportion to
// each branch's contribution.
Tensor PropagateRelevance(const Model& model, const ForwardTrace& trace, std::size_t pos,
                          Tensor relevance, LrpRule rule, double epsilon);

// Input relevance for logit[class_index], starting from R = logit * onehot.
Tensor Lrp(const Model& model, const Tensor& input, int class_index, LrpRule rule, double epsilon);

}  // namespace mprt

#endif  // MPRT_LRP_H_
