#pragma once

#include <vector>

#include "dfdepth/tensor.hpp"

namespace dfdepth {

// Elementwise arithmetic (shapes must match exactly).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor divide(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// Full reductions to a scalar.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Shape manipulation.
Tensor reshape(const Tensor& x, Shape shape);
Tensor transpose2d(const Tensor& x);
// out[i] = x[index_map[i]]; backward scatter-adds.
Tensor gather(const Tensor& x, std::vector<std::size_t> index_map, Shape out_shape);
Tensor stack0(const std::vector<Tensor>& xs);
Tensor select0(const Tensor& x, int index);
Tensor slice_cols(const Tensor& x, int start, int len);
Tensor concat_cols(const std::vector<Tensor>& xs);

// Broadcast additions.
Tensor add_row_broadcast(const Tensor& x, const Tensor& bias);     // [N,D] + [D]
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);      // [(B,)C,H,W] + [C]

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor softmax(const Tensor& x, int axis);

// Cross-correlation convention, no kernel flip. Input [(B,)C,H,W],
// kernel [Co,Ci,kh,kw].
Tensor conv2d(const Tensor& x, const Tensor& kernel, int stride, int padding);
// Adjoint of conv2d (padding 0). Input [(B,)Ci,H,W], kernel [Ci,Co,kh,kw],
// output spatial dims (H-1)*stride + kh.
Tensor transpose_conv2d(const Tensor& x, const Tensor& kernel, int stride);

// Batch statistics over the batch and spatial axes; optionally reports them
// so the caller can fold into running buffers.
Tensor batch_norm_train(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                        std::vector<double>* batch_mean = nullptr,
                        std::vector<double>* batch_var = nullptr);
// Normalizes with fixed (running) statistics.
Tensor batch_norm_eval(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                       const std::vector<double>& mean, const std::vector<double>& var, double eps);

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);  // [N,D]

}  // namespace dfdepth
