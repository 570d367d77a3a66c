#include "ops.h"

#include "mprt/error.h"

namespace mprt::ops {
namespace {

Tensor DenseForward(const Tensor& w, const Tensor* bias, const Tensor& in) {
  const int out_dim = w.dim(0);
  const int in_dim = w.dim(1);
  Require(static_cast<int>(in.size()) == in_dim, ErrorCode::kShapeMismatch,
          "dense input size " + std::to_string(in.size()) + " != " + std::to_string(in_dim));
  Tensor out({out_dim});
  const float* x = in.data();
  for (int o = 0; o < out_dim; ++o) {
    const float* row = w.data() + static_cast<std::size_t>(o) * in_dim;
    double acc = bias ? (*bias)[o] : 0.0;
    for (int i = 0; i < in_dim; ++i) acc += static_cast<double>(row[i]) * x[i];
    out[o] = static_cast<float>(acc);
  }
  return out;
}

Tensor DenseTranspose(const Tensor& w, const Tensor& g, const Shape& input_shape) {
  const int out_dim = w.dim(0);
  const int in_dim = w.dim(1);
  std::vector<double> acc(in_dim, 0.0);
  for (int o = 0; o < out_dim; ++o) {
    const float go = g[o];
    if (go == 0.0f) continue;
    const float* row = w.data() + static_cast<std::size_t>(o) * in_dim;
    for (int i = 0; i < in_dim; ++i) acc[i] += static_cast<double>(row[i]) * go;
  }
  Tensor out(input_shape);
  for (int i = 0; i < in_dim; ++i) out[i] = static_cast<float>(acc[i]);
  return out;
}

struct ConvGeometry {
  int in_c, out_c, k, pad, in_h, in_w, out_h, out_w;
};

ConvGeometry Geometry(const Tensor& w, int padding, const Shape& in_shape) {
  ConvGeometry g{};
  g.out_c = w.dim(0);
  g.in_c = w.dim(1);
  g.k = w.dim(2);
  g.pad = padding;
  Require(in_shape.size() == 3 && in_shape[0] == g.in_c, ErrorCode::kShapeMismatch,
          "conv input shape " + ShapeString(in_shape) + " incompatible with weights " +
              ShapeString(w.shape()));
  g.in_h = in_shape[1];
  g.in_w = in_shape[2];
  g.out_h = g.in_h + 2 * padding - g.k + 1;
  g.out_w = g.in_w + 2 * padding - g.k + 1;
  return g;
}

Tensor ConvForward(const Tensor& w, const Tensor* bias, int padding, const Tensor& in) {
  const ConvGeometry g = Geometry(w, padding, in.shape());
  Tensor out({g.out_c, g.out_h, g.out_w});
  for (int co = 0; co < g.out_c; ++co) {
    for (int oy = 0; oy < g.out_h; ++oy) {
      for (int ox = 0; ox < g.out_w; ++ox) {
        double acc = bias ? (*bias)[co] : 0.0;
        for (int ci = 0; ci < g.in_c; ++ci) {
          const float* wk = w.data() + ((static_cast<std::size_t>(co) * g.in_c + ci) * g.k) * g.k;
          const float* plane = in.data() + static_cast<std::size_t>(ci) * g.in_h * g.in_w;
          for (int ky = 0; ky < g.k; ++ky) {
            const int y = oy + ky - g.pad;
            if (y < 0 || y >= g.in_h) continue;
            for (int kx = 0; kx < g.k; ++kx) {
              const int x = ox + kx - g.pad;
              if (x < 0 || x >= g.in_w) continue;
              acc += static_cast<double>(wk[ky * g.k + kx]) * plane[y * g.in_w + x];
            }
          }
        }
        out[(static_cast<std::size_t>(co) * g.out_h + oy) * g.out_w + ox] = static_cast<float>(acc);
      }
    }
  }
  return out;
}

Tensor ConvTranspose(const Tensor& w, int padding, const Tensor& grad_out, const Shape& in_shape) {
  const ConvGeometry g = Geometry(w, padding, in_shape);
  std::vector<double> acc(ShapeSize(in_shape), 0.0);
  for (int co = 0; co < g.out_c; ++co) {
    for (int oy = 0; oy < g.out_h; ++oy) {
      for (int ox = 0; ox < g.out_w; ++ox) {
        const float go = grad_out[(static_cast<std::size_t>(co) * g.out_h + oy) * g.out_w + ox];
        if (go == 0.0f) continue;
        for (int ci = 0; ci < g.in_c; ++ci) {
          const float* wk = w.data() + ((static_cast<std::size_t>(co) * g.in_c + ci) * g.k) * g.k;
          double* plane = acc.data() + static_cast<std::size_t>(ci) * g.in_h * g.in_w;
          for (int ky = 0; ky < g.k; ++ky) {
            const int y = oy + ky - g.pad;
            if (y < 0 || y >= g.in_h) continue;
            for (int kx = 0; kx < g.k; ++kx) {
              const int x = ox + kx - g.pad;
              if (x < 0 || x >= g.in_w) continue;
              plane[y * g.in_w + x] += static_cast<double>(wk[ky * g.k + kx]) * go;
            }
          }
        }
      }
    }
  }
  Tensor out(in_shape);
  for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<float>(acc[i]);
  return out;
}

}  // namespace

Tensor LinearForward(const Layer& layer, const Tensor& weights, const Tensor* bias,
                     const Tensor& input) {
  if (layer.kind == LayerKind::kDense) return DenseForward(weights, bias, input);
  Require(layer.kind == LayerKind::kConv2D, ErrorCode::kInvalidArgument,
          "LinearForward on a non-linear layer");
  return ConvForward(weights, bias, layer.padding, input);
}

Tensor LinearTranspose(const Layer& layer, const Tensor& weights, const Tensor& grad_out,
                       const Shape& input_shape) {
  if (layer.kind == LayerKind::kDense) return DenseTranspose(weights, grad_out, input_shape);
  Require(layer.kind == LayerKind::kConv2D, ErrorCode::kInvalidArgument,
          "LinearTranspose on a non-linear layer");
  return ConvTranspose(weights, layer.padding, grad_out, input_shape);
}

void AccumulateParamGrads(const Layer& layer, const Tensor& input, const Tensor& grad_out,
                          Tensor& weight_grad, Tensor& bias_grad) {
  if (layer.kind == LayerKind::kDense) {
    const int out_dim = layer.weights.dim(0);
    const int in_dim = layer.weights.dim(1);
    for (int o = 0; o < out_dim; ++o) {
      const float go = grad_out[o];
      bias_grad[o] += go;
      if (go == 0.0f) continue;
      float* row = weight_grad.data() + static_cast<std::size_t>(o) * in_dim;
      for (int i = 0; i < in_dim; ++i) row[i] += go * input[i];
    }
    return;
  }
  const ConvGeometry g = Geometry(layer.weights, layer.padding, input.shape());
  for (int co = 0; co < g.out_c; ++co) {
    for (int oy = 0; oy < g.out_h; ++oy) {
      for (int ox = 0; ox < g.out_w; ++ox) {
        const float go = grad_out[(static_cast<std::size_t>(co) * g.out_h + oy) * g.out_w + ox];
        bias_grad[co] += go;
        if (go == 0.0f) continue;
        for (int ci = 0; ci < g.in_c; ++ci) {
          float* wk = weight_grad.data() + ((static_cast<std::size_t>(co) * g.in_c + ci) * g.k) * g.k;
          const float* plane = input.data() + static_cast<std::size_t>(ci) * g.in_h * g.in_w;
          for (int ky = 0; ky < g.k; ++ky) {
            const int y = oy + ky - g.pad;
            if (y < 0 || y >= g.in_h) continue;
            for (int kx = 0; kx < g.k; ++kx) {
              const int x = ox + kx - g.pad;
              if (x < 0 || x >= g.in_w) continue;
              wk[ky * g.k + kx] += go * plane[y * g.in_w + x];
            }
          }
        }
      }
    }
  }
}

Tensor MaxPoolForward(const Tensor& input, int size) {
  const int c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int oh = h / size, ow = w / size;
  Tensor out({c, oh, ow});
  for (int ch = 0; ch < c; ++ch) {
    const float* plane = input.data() + static_cast<std::size_t>(ch) * h * w;
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        float best = plane[(oy * size) * w + ox * size];
        for (int dy = 0; dy < size; ++dy)
          for (int dx = 0; dx < size; ++dx) {
            const float v = plane[(oy * size + dy) * w + ox * size + dx];
            if (v > best) best = v;
          }
        out[(static_cast<std::size_t>(ch) * oh + oy) * ow + ox] = best;
      }
    }
  }
  return out;
}

Tensor MaxPoolRoute(const Tensor& input, int size, const Tensor& signal_out) {
  const int c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int oh = h / size, ow = w / size;
  Tensor out(input.shape());
  for (int ch = 0; ch < c; ++ch) {
    const std::size_t base = static_cast<std::size_t>(ch) * h * w;
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        std::size_t arg = base + static_cast<std::size_t>(oy * size) * w + ox * size;
        for (int dy = 0; dy < size; ++dy)
          for (int dx = 0; dx < size; ++dx) {
            const std::size_t idx = base + static_cast<std::size_t>(oy * size + dy) * w + ox * size + dx;
            if (input[idx] > input[arg]) arg = idx;
          }
        out[arg] += signal_out[(static_cast<std::size_t>(ch) * oh + oy) * ow + ox];
      }
    }
  }
  return out;
}

}  // namespace mprt::ops
