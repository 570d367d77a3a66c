// Dense and convolution kernels shared by the forward pass, backprop, LRP and
// the trainer. Internal header.
#ifndef MPRT_SRC_OPS_H_
#define MPRT_SRC_OPS_H_

#include "mprt/model.h"
#include "mprt/tensor.h"

namespace mprt::ops {

// out = W x (+ b). weights may differ from layer.weights (LRP uses clamped
// copies); only the layer's kind and geometry are read from layer.
Tensor LinearForward(const Layer& layer, const Tensor& weights, const Tensor* bias,
                     const Tensor& input);

// grad_in = W^T grad_out, shaped like the layer input.
Tensor LinearTranspose(const Layer& layer, const Tensor& weights, const Tensor& grad_out,
                       const Shape& input_shape);

// dW += grad_out x^T, db += grad_out.
void AccumulateParamGrads(const Layer& layer, const Tensor& input, const Tensor& grad_out,
                          Tensor& weight_grad, Tensor& bias_grad);

Tensor MaxPoolForward(const Tensor& input, int size);
// Routes each window's signal to its (first) maximum.
Tensor MaxPoolRoute(const Tensor& input, int size, const Tensor& signal_out);

}  // namespace mprt::ops

#endif  // MPRT_SRC_OPS_H_
