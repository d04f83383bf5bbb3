#include "dfdepth/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

namespace dfdepth {

namespace {

using detail::Node;

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                        " vs " + shape_str(b.shape()));
}

void finish_recompute(Node& self, std::vector<double> out) {
    detail::quantize_inplace(out);
    detail::check_finite(self.op, out);
    self.data = std::move(out);
}

// Elementwise op factory: fwd(a_i, b_i), backward via dfa/dfb evaluated from
// the saved parent data.
template <typename F, typename Ga, typename Gb>
Tensor binary_elementwise(const char* name, const Tensor& a, const Tensor& b, F fwd, Ga dfa, Gb dfb) {
    require_same_shape(name, a, b);
    const std::size_t n = a.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = fwd(a.data()[i], b.data()[i]);
    Tensor y = detail::make_op(name, a.shape(), std::move(out), {a, b});
    Node* yn = y.node().get();
    if (y.requires_grad()) {
        yn->backward_fn = [dfa, dfb](Node& self) {
            Node& an = *self.parents[0];
            Node& bn = *self.parents[1];
            const std::size_t n = self.data.size();
            for (std::size_t i = 0; i < n; ++i) {
                const double g = self.grad[i];
                if (an.requires_grad) an.grad[i] += g * dfa(an.data[i], bn.data[i]);
                if (bn.requires_grad) bn.grad[i] += g * dfb(an.data[i], bn.data[i]);
            }
        };
    }
    yn->recompute_fn = [fwd](Node& self) {
        const Node& an = *self.parents[0];
        const Node& bn = *self.parents[1];
        std::vector<double> out(self.data.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(an.data[i], bn.data[i]);
        finish_recompute(self, std::move(out));
    };
    return y;
}

// Resolves [(B,)C,H,W] into an explicit batch view.
struct Conv4d {
    int B, C, H, W;
    bool batched;
};

Conv4d as_batched(const char* op, const Tensor& x) {
    if (x.ndim() == 3) return {1, x.dim(0), x.dim(1), x.dim(2), false};
    if (x.ndim() == 4) return {x.dim(0), x.dim(1), x.dim(2), x.dim(3), true};
    throw std::invalid_argument(std::string(op) + ": expected 3-d or 4-d input, got " +
                                shape_str(x.shape()));
}

void conv2d_fwd_kernel(const double* x, int B, int Ci, int H, int W, const double* k, int Co,
                       int kh, int kw, int stride, int pad, double* y, int Ho, int Wo) {
    std::fill(y, y + static_cast<std::size_t>(B) * Co * Ho * Wo, 0.0);
    for (int b = 0; b < B; ++b) {
        for (int co = 0; co < Co; ++co) {
            double* yp = y + (static_cast<std::size_t>(b) * Co + co) * Ho * Wo;
            for (int ci = 0; ci < Ci; ++ci) {
                const double* xp = x + (static_cast<std::size_t>(b) * Ci + ci) * H * W;
                const double* kp = k + (static_cast<std::size_t>(co) * Ci + ci) * kh * kw;
                for (int r = 0; r < kh; ++r) {
                    for (int c = 0; c < kw; ++c) {
                        const double kv = kp[r * kw + c];
                        if (kv == 0.0) continue;
                        for (int ho = 0; ho < Ho; ++ho) {
                            const int hi = ho * stride + r - pad;
                            if (hi < 0 || hi >= H) continue;
                            const double* xrow = xp + hi * W;
                            double* yrow = yp + ho * Wo;
                            for (int wo = 0; wo < Wo; ++wo) {
                                const int wi = wo * stride + c - pad;
                                if (wi < 0 || wi >= W) continue;
                                yrow[wo] += kv * xrow[wi];
                            }
                        }
                    }
                }
            }
        }
    }
}

void tconv2d_fwd_kernel(const double* x, int B, int Ci, int H, int W, const double* k, int Co,
                        int kh, int kw, int stride, double* y, int Ho, int Wo) {
    std::fill(y, y + static_cast<std::size_t>(B) * Co * Ho * Wo, 0.0);
    for (int b = 0; b < B; ++b) {
        for (int ci = 0; ci < Ci; ++ci) {
            const double* xp = x + (static_cast<std::size_t>(b) * Ci + ci) * H * W;
            for (int co = 0; co < Co; ++co) {
                double* yp = y + (static_cast<std::size_t>(b) * Co + co) * Ho * Wo;
                const double* kp = k + (static_cast<std::size_t>(ci) * Co + co) * kh * kw;
                for (int h = 0; h < H; ++h) {
                    for (int w = 0; w < W; ++w) {
                        const double xv = xp[h * W + w];
                        if (xv == 0.0) continue;
                        for (int r = 0; r < kh; ++r) {
                            double* yrow = yp + (h * stride + r) * Wo + w * stride;
                            for (int c = 0; c < kw; ++c) yrow[c] += xv * kp[r * kw + c];
                        }
                    }
                }
            }
        }
    }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        "add", a, b, [](double x, double y) { return x + y; },
        [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        "sub", a, b, [](double x, double y) { return x - y; },
        [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        "mul", a, b, [](double x, double y) { return x * y; },
        [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor divide(const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        "divide", a, b, [](double x, double y) { return x / y; },
        [](double, double y) { return 1.0 / y; },
        [](double x, double y) { return -x / (y * y); });
}

Tensor scale(const Tensor& a, double s) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * s;
    Tensor y = detail::make_op("scale", a.shape(), std::move(out), {a});
    Node* yn = y.node().get();
    if (y.requires_grad()) {
        yn->backward_fn = [s](Node& self) {
            Node& an = *self.parents[0];
            for (std::size_t i = 0; i < self.data.size(); ++i) an.grad[i] += s * self.grad[i];
        };
    }
    yn->recompute_fn = [s](Node& self) {
        std::vector<double> out(self.data.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = self.parents[0]->data[i] * s;
        finish_recompute(self, std::move(out));
    };
    return y;
}

Tensor add_scalar(const Tensor& a, double s) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + s;
    Tensor y = detail::make_op("add_scalar", a.shape(), std::move(out), {a});
    Node* yn = y.node().get();
    if (y.requires_grad()) {
        yn->backward_fn = [](Node& self) {
            Node& an = *self.parents[0];
            for (std::size_t i = 0; i < self.data.size(); ++i) an.grad[i] += self.grad[i];
        };
    }
    yn->recompute_fn = [s](Node& self) {
        std::vector<double> out(self.data.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = self.parents[0]->data[i] + s;
        finish_recompute(self, std::move(out));
    };
    return y;
}

Tensor relu(const Tensor& x) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] > 0.0 ? x.data()[i] : 0.0;
    Tensor y = detail::make_op("relu", x.shape(), std::move(out), {x});
    Node* yn = y.node().get();
    if (y.requires_grad()) {
        // Subgradient at exactly 0 is 0.
        yn->backward_fn = [](Node& self) {
            Node& xn = *self.parents[0];
            for (std::size_t i = 0; i < self.data.size(); ++i) {
                if (xn.data[i] > 0.0) xn.grad[i] += self.grad[i];
            }
        };
    }
    yn->recompute_fn = [](Node& self) {
        std::vector<double> out(self.data.size());
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double v = self.parents[0]->data[i];
            out[i] = v > 0.0 ? v : 0.0;
        }
        finish_recompute(self, std::move(out));
    };
    return y;
}

Tensor sigmoid(const Tensor& x) {
    auto sig = [](double v) { return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); };
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = sig(x.data()[i]);
    Tensor y = detail::make_op("sigmoid", x.shape(), std::move(out), {x});
    Node* yn = y.node().get();
    if (y.requires_grad()) {
        yn->backward_fn = [](Node& self) {
            Node& xn = *self.parents[0];
            for (std::size_t i = 0; i < self.data.size(); ++i) {
                const double s = self.data[i];
                xn.grad[i] += self.grad[i] * s * (1.0 - s);
            }
        };
    }
    yn->recompute_fn = [sig](Node& self) {
        std::vector<double> out(self.data.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = sig(self.parents[0]->data[i]);
        finish_recompute(self, std::move(out));
    };
    return y;
}

Tensor sum(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    Tensor y = detail::make_op("sum", {1}, {acc}, {x});
    Node* yn = y.node().get();
    if (y.requires_grad()) {
        yn->backward_fn = [](Node& self) {
            Node& xn = *self.parents[0];
            const double g = self.grad[0];
            for (double& gv : xn.grad) gv += g;
        };
    }
    yn->recompute_fn = [](Node& self) {
        double acc = 0.0;
        for (double v : self.parents[0]->data) acc += v;
        finish_recompute(self, {acc});
    };
    return y;
}

Tensor mean(const Tensor& x) {
    const double inv_n = 1.0 / static_cast<double>(x.size());
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    Tensor y = detail::make_op("mean", {1}, {acc * inv_n}, {x});
    Node* yn = y.node().get();
    if (y.requires_grad()) {
        yn->backward_fn = [inv_n](Node& self) {
            Node& xn = *self.parents[0];
            const double g = self.grad[0] * inv_n;
            for (double& gv : xn.grad) gv += g;
        };
    }
    yn->recompute_fn = [inv_n](Node& self) {
        double acc = 0.0;
        for (double v : self.parents[0]->data) acc += v;
        finish_recompute(self, {acc * inv_n});
    };
    return y;
}

Tensor reshape(const Tensor& x, Shape shape) {
    require(numel(shape) == x.size(), "reshape: element count mismatch " + shape_str(x.shape()) +
                                          " -> " + shape_str(shape));
    std::vector<double> out(x.data().begin(), x.data().end());
    Tensor y = detail::make_op("reshape", std::move(shape), std::move(out), {x});
    Node* yn = y.node().get();
    if (y.requires_grad()) {
        yn->backward_fn = [](Node& self) {
            Node& xn = *self.parents[0];
            for (std::size_t i = 0; i < self.data.size(); ++i) xn.grad[i] += self.grad[i];
        };
    }
    yn->recompute_fn = [](Node& self) {
        finish_recompute(self, self.parents[0]->data);
    };
    return y;
}

Tensor transpose2d(const Tensor& x) {
    require(x.ndim() == 2, "transpose2d: expected 2-d tensor, got " + shape_str(x.shape()));
    const int r = x.dim(0), c = x.dim(1);
    std::vector<double> out(x.size());
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out[static_cast<std::size_t>(j) * r + i] = x.data()[static_cast<std::size_t>(i) * c + j];
    Tensor y = detail::make_op("transpose2d", {c, r}, std::move(out), {x});
    Node* yn = y.node().get();
    if (y.requires_grad()) {
        yn->backward_fn = [r, c](Node& self) {
            Node& xn = *self.parents[0];
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < c; ++j)
                    xn.grad[static_cast<std::size_t>(i) * c + j] += self.grad[static_cast<std::size_t>(j) * r + i];
        };
    }
    yn->recompute_fn = [r, c](Node& self) {
        std::vector<double> out(self.data.size());
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j)
                out[static_cast<std::size_t>(j) * r + i] = self.parents[0]->data[static_cast<std::size_t>(i) * c + j];
        finish_recompute(self, std::move(out));
    };
    return y;
}

Tensor gather(const Tensor& x, std::vector<std::size_t> index_map, Shape out_shape) {
    require(index_map.size() == numel(out_shape), "gather: index map length does not match output shape");
    for (std::size_t idx : index_map) {
        require(idx < x.size(), "gather: index out of range for input " + shape_str(x.shape()));
    }
    auto map = std::make_shared<const std::vector<std::size_t>>(std::move(index_map));
    std::vector<double> out(map->size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[(*map)[i]];
    Tensor y = detail::make_op("gather", std::move(out_shape), std::move(out), {x});
    Node* yn = y.node().get();
    if (y.requires_grad()) {
        yn->backward_fn = [map](Node& self) {
            Node& xn = *self.parents[0];
            for (std::size_t i = 0; i < self.data.size(); ++i) xn.grad[(*map)[i]] += self.grad[i];
        };
    }
    yn->recompute_fn = [map](Node& self) {
        std::vector<double> out(self.data.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = self.parents[0]->data[(*map)[i]];
        finish_recompute(self, std::move(out));
    };
    return y;
}

Tensor stack0(const std::vector<Tensor>& xs) {
    require(!xs.empty(), "stack0: empty tensor list");
    const Shape& s = xs[0].shape();
    for (const Tensor& t : xs) {
        require(t.shape() == s, "stack0: mismatched shapes " + shape_str(s) + " vs " + shape_str(t.shape()));
    }
    const std::size_t per = xs[0].size();
    Shape out_shape;
    out_shape.push_back(static_cast<int>(xs.size()));
    out_shape.insert(out_shape.end(), s.begin(), s.end());
    std::vector<double> out(per * xs.size());
    for (std::size_t b = 0; b < xs.size(); ++b) {
        std::copy(xs[b].data().begin(), xs[b].data().end(), out.begin() + static_cast<std::ptrdiff_t>(b * per));
    }
    Tensor y = detail::make_op("stack0", std::move(out_shape), std::move(out), xs);
    Node* yn = y.node().get();
    if (y.requires_grad()) {
        yn->backward_fn = [per](Node& self) {
            for (std::size_t b = 0; b < self.parents.size(); ++b) {
                Node& p = *self.parents[b];
                if (!p.requires_grad) continue;
                for (std::size_t i = 0; i < per; ++i) p.grad[i] += self.grad[b * per + i];
            }
        };
    }
    yn->recompute_fn = [per](Node& self) {
        std::vector<double> out(self.data.size());
        for (std::size_t b = 0; b < self.parents.size(); ++b) {
            const auto& d = self.parents[b]->data;
            std::copy(d.begin(), d.end(), out.begin() + static_cast<std::ptrdiff_t>(b * per));
        }
        finish_recompute(self, std::move(out));
    };
    return y;
}

Tensor select0(const Tensor& x, int index) {
    require(x.ndim() >= 2, "select0: tensor rank must be >= 2");
    require(index >= 0 && index < x.dim(0), "select0: index out of range");
    Shape out_shape(x.shape().begin() + 1, x.shape().end());
    const std::size_t per = numel(out_shape);
    const std::size_t off = static_cast<std::size_t>(index) * per;
    std::vector<double> out(x.data().begin() + static_cast<std::ptrdiff_t>(off),
                            x.data().begin() + static_cast<std::ptrdiff_t>(off + per));
    Tensor y = detail::make_op("select0", std::move(out_shape), std::move(out), {x});
    Node* yn = y.node().get();
    if (y.requires_grad()) {
        yn->backward_fn = [off](Node& self) {
            Node& xn = *self.parents[0];
            for (std::size_t i = 0; i < self.data.size(); ++i) xn.grad[off + i] += self.grad[i];
        };
    }
    yn->recompute_fn = [off, per](Node& self) {
        const auto& d = self.parents[0]->data;
        std::vector<double> out(d.begin() + static_cast<std::ptrdiff_t>(off),
                                d.begin() + static_cast<std::ptrdiff_t>(off + per));
        finish_recompute(self, std::move(out));
    };
    return y;
}

Tensor slice_cols(const Tensor& x, int start, int len) {
    require(x.ndim() == 2, "slice_cols: expected 2-d tensor, got " + shape_str(x.shape()));
    const int n = x.dim(0), d = x.dim(1);
    require(start >= 0 && len > 0 && start + len <= d, "slice_cols: range out of bounds");
    std::vector<double> out(static_cast<std::size_t>(n) * len);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < len; ++j)
            out[static_cast<std::size_t>(i) * len + j] = x.data()[static_cast<std::size_t>(i) * d + start + j];
    Tensor y = detail::make_op("slice_cols", {n, len}, std::move(out), {x});
    Node* yn = y.node().get();
    if (y.requires_grad()) {
        yn->backward_fn = [n, d, start, len](Node& self) {
            Node& xn = *self.parents[0];
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < len; ++j)
                    xn.grad[static_cast<std::size_t>(i) * d + start + j] += self.grad[static_cast<std::size_t>(i) * len + j];
        };
    }
    yn->recompute_fn = [n, d, start, len](Node& self) {
        std::vector<double> out(static_cast<std::size_t>(n) * len);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < len; ++j)
                out[static_cast<std::size_t>(i) * len + j] = self.parents[0]->data[static_cast<std::size_t>(i) * d + start + j];
        finish_recompute(self, std::move(out));
    };
    return y;
}

Tensor concat_cols(const std::vector<Tensor>& xs) {
    require(!xs.empty(), "concat_cols: empty tensor list");
    const int n = xs[0].dim(0);
    int total = 0;
    std::vector<int> widths;
    for (const Tensor& t : xs) {
        require(t.ndim() == 2 && t.dim(0) == n, "concat_cols: row counts differ");
        widths.push_back(t.dim(1));
        total += t.dim(1);
    }
    std::vector<double> out(static_cast<std::size_t>(n) * total);
    int col = 0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const int w = widths[k];
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < w; ++j)
                out[static_cast<std::size_t>(i) * total + col + j] = xs[k].data()[static_cast<std::size_t>(i) * w + j];
        col += w;
    }
    Tensor y = detail::make_op("concat_cols", {n, total}, std::move(out), xs);
    Node* yn = y.node().get();
    if (y.requires_grad()) {
        yn->backward_fn = [n, total, widths](Node& self) {
            int col = 0;
            for (std::size_t k = 0; k < self.parents.size(); ++k) {
                Node& p = *self.parents[k];
                const int w = widths[k];
                if (p.requires_grad) {
                    for (int i = 0; i < n; ++i)
                        for (int j = 0; j < w; ++j)
                            p.grad[static_cast<std::size_t>(i) * w + j] += self.grad[static_cast<std::size_t>(i) * total + col + j];
                }
                col += w;
            }
        };
    }
    yn->recompute_fn = [n, total, widths](Node& self) {
        std::vector<double> out(self.data.size());
        int col = 0;
        for (std::size_t k = 0; k < self.parents.size(); ++k) {
            const int w = widths[k];
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < w; ++j)
                    out[static_cast<std::size_t>(i) * total + col + j] = self.parents[k]->data[static_cast<std::size_t>(i) * w + j];
            col += w;
        }
        finish_recompute(self, std::move(out));
    };
    return y;
}

Tensor add_row_broadcast(const Tensor& x, const Tensor& bias) {
    require(x.ndim() == 2, "add_row_broadcast: expected 2-d tensor, got " + shape_str(x.shape()));
    require(bias.ndim() == 1 && bias.dim(0) == x.dim(1),
            "add_row_broadcast: bias " + shape_str(bias.shape()) + " does not match columns of " +
                shape_str(x.shape()));
    const int n = x.dim(0), d = x.dim(1);
    std::vector<double> out(x.size());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j)
            out[static_cast<std::size_t>(i) * d + j] = x.data()[static_cast<std::size_t>(i) * d + j] + bias.data()[static_cast<std::size_t>(j)];
    Tensor y = detail::make_op("add_row_broadcast", x.shape(), std::move(out), {x, bias});
    Node* yn = y.node().get();
    if (y.requires_grad()) {
        yn->backward_fn = [n, d](Node& self) {
            Node& xn = *self.parents[0];
            Node& bn = *self.parents[1];
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < d; ++j) {
                    const double g = self.grad[static_cast<std::size_t>(i) * d + j];
                    if (xn.requires_grad) xn.grad[static_cast<std::size_t>(i) * d + j] += g;
                    if (bn.requires_grad) bn.grad[static_cast<std::size_t>(j)] += g;
                }
            }
        };
    }
    yn->recompute_fn = [n, d](Node& self) {
        std::vector<double> out(self.data.size());
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j)
                out[static_cast<std::size_t>(i) * d + j] = self.parents[0]->data[static_cast<std::size_t>(i) * d + j] +
                                                           self.parents[1]->data[static_cast<std::size_t>(j)];
        finish_recompute(self, std::move(out));
    };
    return y;
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
    const Conv4d v = as_batched("add_channel_bias", x);
    require(bias.ndim() == 1 && bias.dim(0) == v.C,
            "add_channel_bias: bias " + shape_str(bias.shape()) + " does not match channels of " +
                shape_str(x.shape()));
    const std::size_t hw = static_cast<std::size_t>(v.H) * v.W;
    std::vector<double> out(x.size());
    for (int b = 0; b < v.B; ++b)
        for (int c = 0; c < v.C; ++c) {
            const std::size_t off = (static_cast<std::size_t>(b) * v.C + c) * hw;
            const double bv = bias.data()[static_cast<std::size_t>(c)];
            for (std::size_t i = 0; i < hw; ++i) out[off + i] = x.data()[off + i] + bv;
        }
    Tensor y = detail::make_op("add_channel_bias", x.shape(), std::move(out), {x, bias});
    Node* yn = y.node().get();
    const int B = v.B, C = v.C;
    if (y.requires_grad()) {
        yn->backward_fn = [B, C, hw](Node& self) {
            Node& xn = *self.parents[0];
            Node& bn = *self.parents[1];
            for (int b = 0; b < B; ++b)
                for (int c = 0; c < C; ++c) {
                    const std::size_t off = (static_cast<std::size_t>(b) * C + c) * hw;
                    double acc = 0.0;
                    for (std::size_t i = 0; i < hw; ++i) {
                        const double g = self.grad[off + i];
                        if (xn.requires_grad) xn.grad[off + i] += g;
                        acc += g;
                    }
                    if (bn.requires_grad) bn.grad[static_cast<std::size_t>(c)] += acc;
                }
        };
    }
    yn->recompute_fn = [B, C, hw](Node& self) {
        std::vector<double> out(self.data.size());
        for (int b = 0; b < B; ++b)
            for (int c = 0; c < C; ++c) {
                const std::size_t off = (static_cast<std::size_t>(b) * C + c) * hw;
                const double bv = self.parents[1]->data[static_cast<std::size_t>(c)];
                for (std::size_t i = 0; i < hw; ++i) out[off + i] = self.parents[0]->data[off + i] + bv;
            }
        finish_recompute(self, std::move(out));
    };
    return y;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require(a.ndim() == 2 && b.ndim() == 2,
            "matmul: expected 2-d tensors, got " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
    require(a.dim(1) == b.dim(0), "matmul: inner dimensions differ, " + shape_str(a.shape()) +
                                      " vs " + shape_str(b.shape()));
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    auto kernel = [m, k, n](const double* A, const double* B, double* C) {
        std::fill(C, C + static_cast<std::size_t>(m) * n, 0.0);
        for (int i = 0; i < m; ++i) {
            for (int p = 0; p < k; ++p) {
                const double av = A[static_cast<std::size_t>(i) * k + p];
                const double* brow = B + static_cast<std::size_t>(p) * n;
                double* crow = C + static_cast<std::size_t>(i) * n;
                for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    };
    std::vector<double> out(static_cast<std::size_t>(m) * n);
    kernel(a.data().data(), b.data().data(), out.data());
    Tensor y = detail::make_op("matmul", {m, n}, std::move(out), {a, b});
    Node* yn = y.node().get();
    if (y.requires_grad()) {
        yn->backward_fn = [m, k, n](Node& self) {
            Node& an = *self.parents[0];
            Node& bn = *self.parents[1];
            if (an.requires_grad) {  // dA = dC * B^T
                for (int i = 0; i < m; ++i)
                    for (int p = 0; p < k; ++p) {
                        double acc = 0.0;
                        for (int j = 0; j < n; ++j)
                            acc += self.grad[static_cast<std::size_t>(i) * n + j] * bn.data[static_cast<std::size_t>(p) * n + j];
                        an.grad[static_cast<std::size_t>(i) * k + p] += acc;
                    }
            }
            if (bn.requires_grad) {  // dB = A^T * dC
                for (int p = 0; p < k; ++p)
                    for (int j = 0; j < n; ++j) {
                        double acc = 0.0;
                        for (int i = 0; i < m; ++i)
                            acc += an.data[static_cast<std::size_t>(i) * k + p] * self.grad[static_cast<std::size_t>(i) * n + j];
                        bn.grad[static_cast<std::size_t>(p) * n + j] += acc;
                    }
            }
        };
    }
    yn->recompute_fn = [kernel](Node& self) {
        std::vector<double> out(self.data.size());
        kernel(self.parents[0]->data.data(), self.parents[1]->data.data(), out.data());
        finish_recompute(self, std::move(out));
    };
    return y;
}

Tensor softmax(const Tensor& x, int axis) {
    require(axis >= 0 && axis < x.ndim(), "softmax: axis " + std::to_string(axis) +
                                              " invalid for shape " + shape_str(x.shape()));
    const Shape shape = x.shape();
    std::size_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= static_cast<std::size_t>(shape[static_cast<std::size_t>(i)]);
    for (int i = axis + 1; i < x.ndim(); ++i) inner *= static_cast<std::size_t>(shape[static_cast<std::size_t>(i)]);
    const std::size_t n = static_cast<std::size_t>(shape[static_cast<std::size_t>(axis)]);

    auto kernel = [outer, inner, n](const std::vector<double>& in, std::vector<double>& out) {
        for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t i = 0; i < inner; ++i) {
                const std::size_t base = o * n * inner + i;
                double mx = in[base];
                for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, in[base + j * inner]);
                double z = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    const double e = std::exp(in[base + j * inner] - mx);
                    out[base + j * inner] = e;
                    z += e;
                }
                const double inv = 1.0 / z;
                for (std::size_t j = 0; j < n; ++j) out[base + j * inner] *= inv;
            }
        }
    };
    std::vector<double> out(x.size());
    kernel(x.node()->data, out);
    Tensor y = detail::make_op("softmax", shape, std::move(out), {x});
    Node* yn = y.node().get();
    if (y.requires_grad()) {
        yn->backward_fn = [outer, inner, n](Node& self) {
            Node& xn = *self.parents[0];
            for (std::size_t o = 0; o < outer; ++o) {
                for (std::size_t i = 0; i < inner; ++i) {
                    const std::size_t base = o * n * inner + i;
                    double dot = 0.0;
                    for (std::size_t j = 0; j < n; ++j) dot += self.grad[base + j * inner] * self.data[base + j * inner];
                    for (std::size_t j = 0; j < n; ++j) {
                        const std::size_t idx = base + j * inner;
                        xn.grad[idx] += self.data[idx] * (self.grad[idx] - dot);
                    }
                }
            }
        };
    }
    yn->recompute_fn = [kernel](Node& self) {
        std::vector<double> out(self.data.size());
        kernel(self.parents[0]->data, out);
        finish_recompute(self, std::move(out));
    };
    return y;
}

Tensor conv2d(const Tensor& x, const Tensor& kernel, int stride, int padding) {
    const Conv4d v = as_batched("conv2d", x);
    require(kernel.ndim() == 4, "conv2d: kernel must be 4-d [Co,Ci,kh,kw], got " + shape_str(kernel.shape()));
    const int Co = kernel.dim(0), Ci = kernel.dim(1), kh = kernel.dim(2), kw = kernel.dim(3);
    require(Ci == v.C, "conv2d: input channels " + shape_str(x.shape()) + " do not match kernel " +
                           shape_str(kernel.shape()));
    require(stride >= 1, "conv2d: stride must be >= 1");
    require(padding >= 0, "conv2d: padding must be >= 0");
    require(kh <= v.H + 2 * padding && kw <= v.W + 2 * padding,
            "conv2d: kernel " + shape_str(kernel.shape()) + " larger than padded input " +
                shape_str(x.shape()));
    const int Ho = (v.H + 2 * padding - kh) / stride + 1;
    const int Wo = (v.W + 2 * padding - kw) / stride + 1;

    std::vector<double> out(static_cast<std::size_t>(v.B) * Co * Ho * Wo);
    conv2d_fwd_kernel(x.data().data(), v.B, v.C, v.H, v.W, kernel.data().data(), Co, kh, kw, stride,
                      padding, out.data(), Ho, Wo);
    Shape out_shape = v.batched ? Shape{v.B, Co, Ho, Wo} : Shape{Co, Ho, Wo};
    Tensor y = detail::make_op("conv2d", std::move(out_shape), std::move(out), {x, kernel});
    Node* yn = y.node().get();
    const int B = v.B, C = v.C, H = v.H, W = v.W;
    if (y.requires_grad()) {
        yn->backward_fn = [B, C, H, W, Co, kh, kw, stride, padding, Ho, Wo](Node& self) {
            Node& xn = *self.parents[0];
            Node& kn = *self.parents[1];
            const double* g = self.grad.data();
            for (int b = 0; b < B; ++b) {
                for (int co = 0; co < Co; ++co) {
                    const double* gp = g + (static_cast<std::size_t>(b) * Co + co) * Ho * Wo;
                    for (int ci = 0; ci < C; ++ci) {
                        const std::size_t xoff = (static_cast<std::size_t>(b) * C + ci) * H * W;
                        const std::size_t koff = (static_cast<std::size_t>(co) * C + ci) * kh * kw;
                        for (int r = 0; r < kh; ++r) {
                            for (int c = 0; c < kw; ++c) {
                                const double kv = kn.data[koff + static_cast<std::size_t>(r) * kw + c];
                                double kacc = 0.0;
                                for (int ho = 0; ho < Ho; ++ho) {
                                    const int hi = ho * stride + r - padding;
                                    if (hi < 0 || hi >= H) continue;
                                    for (int wo = 0; wo < Wo; ++wo) {
                                        const int wi = wo * stride + c - padding;
                                        if (wi < 0 || wi >= W) continue;
                                        const double gv = gp[ho * Wo + wo];
                                        if (xn.requires_grad)
                                            xn.grad[xoff + static_cast<std::size_t>(hi) * W + wi] += gv * kv;
                                        kacc += gv * xn.data[xoff + static_cast<std::size_t>(hi) * W + wi];
                                    }
                                }
                                if (kn.requires_grad) kn.grad[koff + static_cast<std::size_t>(r) * kw + c] += kacc;
                            }
                        }
                    }
                }
            }
        };
    }
    yn->recompute_fn = [B, C, H, W, Co, kh, kw, stride, padding, Ho, Wo](Node& self) {
        std::vector<double> out(self.data.size());
        conv2d_fwd_kernel(self.parents[0]->data.data(), B, C, H, W, self.parents[1]->data.data(), Co,
                          kh, kw, stride, padding, out.data(), Ho, Wo);
        finish_recompute(self, std::move(out));
    };
    return y;
}

Tensor transpose_conv2d(const Tensor& x, const Tensor& kernel, int stride) {
    const Conv4d v = as_batched("transpose_conv2d", x);
    require(kernel.ndim() == 4, "transpose_conv2d: kernel must be 4-d [Ci,Co,kh,kw], got " +
                                    shape_str(kernel.shape()));
    const int Ci = kernel.dim(0), Co = kernel.dim(1), kh = kernel.dim(2), kw = kernel.dim(3);
    require(Ci == v.C, "transpose_conv2d: input channels " + shape_str(x.shape()) +
                           " do not match kernel " + shape_str(kernel.shape()));
    require(stride >= 1, "transpose_conv2d: stride must be >= 1");
    const int Ho = (v.H - 1) * stride + kh;
    const int Wo = (v.W - 1) * stride + kw;

    std::vector<double> out(static_cast<std::size_t>(v.B) * Co * Ho * Wo);
    tconv2d_fwd_kernel(x.data().data(), v.B, v.C, v.H, v.W, kernel.data().data(), Co, kh, kw, stride,
                       out.data(), Ho, Wo);
    Shape out_shape = v.batched ? Shape{v.B, Co, Ho, Wo} : Shape{Co, Ho, Wo};
    Tensor y = detail::make_op("transpose_conv2d", std::move(out_shape), std::move(out), {x, kernel});
    Node* yn = y.node().get();
    const int B = v.B, C = v.C, H = v.H, W = v.W;
    if (y.requires_grad()) {
        yn->backward_fn = [B, C, H, W, Co, kh, kw, stride, Ho, Wo](Node& self) {
            Node& xn = *self.parents[0];
            Node& kn = *self.parents[1];
            for (int b = 0; b < B; ++b) {
                for (int ci = 0; ci < C; ++ci) {
                    const std::size_t xoff = (static_cast<std::size_t>(b) * C + ci) * H * W;
                    for (int co = 0; co < Co; ++co) {
                        const double* gp = self.grad.data() + (static_cast<std::size_t>(b) * Co + co) * Ho * Wo;
                        const std::size_t koff = (static_cast<std::size_t>(ci) * Co + co) * kh * kw;
                        for (int h = 0; h < H; ++h) {
                            for (int w = 0; w < W; ++w) {
                                const double xv = xn.data[xoff + static_cast<std::size_t>(h) * W + w];
                                double xacc = 0.0;
                                for (int r = 0; r < kh; ++r) {
                                    const double* grow = gp + (h * stride + r) * Wo + w * stride;
                                    for (int c = 0; c < kw; ++c) {
                                        const double kv = kn.data[koff + static_cast<std::size_t>(r) * kw + c];
                                        xacc += grow[c] * kv;
                                        if (kn.requires_grad) kn.grad[koff + static_cast<std::size_t>(r) * kw + c] += grow[c] * xv;
                                    }
                                }
                                if (xn.requires_grad) xn.grad[xoff + static_cast<std::size_t>(h) * W + w] += xacc;
                            }
                        }
                    }
                }
            }
        };
    }
    yn->recompute_fn = [B, C, H, W, Co, kh, kw, stride, Ho, Wo](Node& self) {
        std::vector<double> out(self.data.size());
        tconv2d_fwd_kernel(self.parents[0]->data.data(), B, C, H, W, self.parents[1]->data.data(), Co,
                           kh, kw, stride, out.data(), Ho, Wo);
        finish_recompute(self, std::move(out));
    };
    return y;
}

namespace {

struct BnDims {
    int B, C, H, W;
};

BnDims bn_dims(const char* op, const Tensor& x, const Tensor& gamma, const Tensor& beta) {
    const Conv4d v = as_batched(op, x);
    require(gamma.ndim() == 1 && gamma.dim(0) == v.C && beta.ndim() == 1 && beta.dim(0) == v.C,
            std::string(op) + ": gamma/beta must be [C] with C=" + std::to_string(v.C));
    return {v.B, v.C, v.H, v.W};
}

}  // namespace

Tensor batch_norm_train(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                        std::vector<double>* batch_mean, std::vector<double>* batch_var) {
    const BnDims d = bn_dims("batch_norm", x, gamma, beta);
    const std::size_t hw = static_cast<std::size_t>(d.H) * d.W;
    const std::size_t n = static_cast<std::size_t>(d.B) * hw;

    auto stats = [d, hw, n](const std::vector<double>& in, std::vector<double>& mu, std::vector<double>& var) {
        mu.assign(static_cast<std::size_t>(d.C), 0.0);
        var.assign(static_cast<std::size_t>(d.C), 0.0);
        for (int c = 0; c < d.C; ++c) {
            double s = 0.0;
            for (int b = 0; b < d.B; ++b) {
                const std::size_t off = (static_cast<std::size_t>(b) * d.C + c) * hw;
                for (std::size_t i = 0; i < hw; ++i) s += in[off + i];
            }
            const double m = s / static_cast<double>(n);
            double v = 0.0;
            for (int b = 0; b < d.B; ++b) {
                const std::size_t off = (static_cast<std::size_t>(b) * d.C + c) * hw;
                for (std::size_t i = 0; i < hw; ++i) {
                    const double t = in[off + i] - m;
                    v += t * t;
                }
            }
            mu[static_cast<std::size_t>(c)] = m;
            var[static_cast<std::size_t>(c)] = v / static_cast<double>(n);
        }
    };

    std::vector<double> mu, var;
    stats(x.node()->data, mu, var);
    if (batch_mean) *batch_mean = mu;
    if (batch_var) *batch_var = var;

    std::vector<double> out(x.size());
    for (int c = 0; c < d.C; ++c) {
        const double inv = 1.0 / std::sqrt(var[static_cast<std::size_t>(c)] + eps);
        const double g = gamma.data()[static_cast<std::size_t>(c)];
        const double bt = beta.data()[static_cast<std::size_t>(c)];
        const double m = mu[static_cast<std::size_t>(c)];
        for (int b = 0; b < d.B; ++b) {
            const std::size_t off = (static_cast<std::size_t>(b) * d.C + c) * hw;
            for (std::size_t i = 0; i < hw; ++i) out[off + i] = g * (x.data()[off + i] - m) * inv + bt;
        }
    }
    Tensor y = detail::make_op("batch_norm", x.shape(), std::move(out), {x, gamma, beta});
    Node* yn = y.node().get();
    if (y.requires_grad()) {
        // Saved forward statistics; x-hat is rebuilt from the parent input.
        yn->backward_fn = [d, hw, n, eps, mu, var](Node& self) {
            Node& xn = *self.parents[0];
            Node& gn = *self.parents[1];
            Node& bn = *self.parents[2];
            const double nn = static_cast<double>(n);
            for (int c = 0; c < d.C; ++c) {
                const double inv = 1.0 / std::sqrt(var[static_cast<std::size_t>(c)] + eps);
                const double m = mu[static_cast<std::size_t>(c)];
                const double g = gn.data[static_cast<std::size_t>(c)];
                double sum_dy = 0.0, sum_dy_xhat = 0.0;
                for (int b = 0; b < d.B; ++b) {
                    const std::size_t off = (static_cast<std::size_t>(b) * d.C + c) * hw;
                    for (std::size_t i = 0; i < hw; ++i) {
                        const double dy = self.grad[off + i];
                        const double xh = (xn.data[off + i] - m) * inv;
                        sum_dy += dy;
                        sum_dy_xhat += dy * xh;
                    }
                }
                if (bn.requires_grad) bn.grad[static_cast<std::size_t>(c)] += sum_dy;
                if (gn.requires_grad) gn.grad[static_cast<std::size_t>(c)] += sum_dy_xhat;
                if (xn.requires_grad) {
                    for (int b = 0; b < d.B; ++b) {
                        const std::size_t off = (static_cast<std::size_t>(b) * d.C + c) * hw;
                        for (std::size_t i = 0; i < hw; ++i) {
                            const double dy = self.grad[off + i];
                            const double xh = (xn.data[off + i] - m) * inv;
                            xn.grad[off + i] += g * inv / nn * (nn * dy - sum_dy - xh * sum_dy_xhat);
                        }
                    }
                }
            }
        };
    }
    yn->recompute_fn = [d, hw, stats, eps](Node& self) {
        std::vector<double> mu, var;
        stats(self.parents[0]->data, mu, var);
        std::vector<double> out(self.data.size());
        for (int c = 0; c < d.C; ++c) {
            const double inv = 1.0 / std::sqrt(var[static_cast<std::size_t>(c)] + eps);
            const double g = self.parents[1]->data[static_cast<std::size_t>(c)];
            const double bt = self.parents[2]->data[static_cast<std::size_t>(c)];
            const double m = mu[static_cast<std::size_t>(c)];
            for (int b = 0; b < d.B; ++b) {
                const std::size_t off = (static_cast<std::size_t>(b) * d.C + c) * hw;
                for (std::size_t i = 0; i < hw; ++i)
                    out[off + i] = g * (self.parents[0]->data[off + i] - m) * inv + bt;
            }
        }
        finish_recompute(self, std::move(out));
    };
    return y;
}

Tensor batch_norm_eval(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                       const std::vector<double>& mean, const std::vector<double>& var, double eps) {
    const BnDims d = bn_dims("batch_norm_eval", x, gamma, beta);
    require(mean.size() == static_cast<std::size_t>(d.C) && var.size() == static_cast<std::size_t>(d.C),
            "batch_norm_eval: running statistics must have C entries");
    const std::size_t hw = static_cast<std::size_t>(d.H) * d.W;

    auto kernel = [d, hw, mean, var, eps](const std::vector<double>& in, const std::vector<double>& g,
                                          const std::vector<double>& bt, std::vector<double>& out) {
        for (int c = 0; c < d.C; ++c) {
            const double inv = 1.0 / std::sqrt(var[static_cast<std::size_t>(c)] + eps);
            const double gg = g[static_cast<std::size_t>(c)];
            const double bb = bt[static_cast<std::size_t>(c)];
            const double m = mean[static_cast<std::size_t>(c)];
            for (int b = 0; b < d.B; ++b) {
                const std::size_t off = (static_cast<std::size_t>(b) * d.C + c) * hw;
                for (std::size_t i = 0; i < hw; ++i) out[off + i] = gg * (in[off + i] - m) * inv + bb;
            }
        }
    };
    std::vector<double> out(x.size());
    kernel(x.node()->data, gamma.node()->data, beta.node()->data, out);
    Tensor y = detail::make_op("batch_norm_eval", x.shape(), std::move(out), {x, gamma, beta});
    Node* yn = y.node().get();
    if (y.requires_grad()) {
        yn->backward_fn = [d, hw, mean, var, eps](Node& self) {
            Node& xn = *self.parents[0];
            Node& gn = *self.parents[1];
            Node& bn = *self.parents[2];
            for (int c = 0; c < d.C; ++c) {
                const double inv = 1.0 / std::sqrt(var[static_cast<std::size_t>(c)] + eps);
                const double m = mean[static_cast<std::size_t>(c)];
                const double g = gn.data[static_cast<std::size_t>(c)];
                for (int b = 0; b < d.B; ++b) {
                    const std::size_t off = (static_cast<std::size_t>(b) * d.C + c) * hw;
                    for (std::size_t i = 0; i < hw; ++i) {
                        const double dy = self.grad[off + i];
                        if (xn.requires_grad) xn.grad[off + i] += dy * g * inv;
                        if (gn.requires_grad) gn.grad[static_cast<std::size_t>(c)] += dy * (xn.data[off + i] - m) * inv;
                        if (bn.requires_grad) bn.grad[static_cast<std::size_t>(c)] += dy;
                    }
                }
            }
        };
    }
    yn->recompute_fn = [kernel](Node& self) {
        std::vector<double> out(self.data.size());
        kernel(self.parents[0]->data, self.parents[1]->data, self.parents[2]->data, out);
        finish_recompute(self, std::move(out));
    };
    return y;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    require(x.ndim() == 2, "layer_norm: expected 2-d tensor, got " + shape_str(x.shape()));
    const int N = x.dim(0), D = x.dim(1);
    require(gamma.ndim() == 1 && gamma.dim(0) == D && beta.ndim() == 1 && beta.dim(0) == D,
            "layer_norm: gamma/beta must be [D] with D=" + std::to_string(D));

    auto kernel = [N, D, eps](const std::vector<double>& in, const std::vector<double>& g,
                              const std::vector<double>& bt, std::vector<double>& out) {
        for (int i = 0; i < N; ++i) {
            const std::size_t off = static_cast<std::size_t>(i) * D;
            double m = 0.0;
            for (int j = 0; j < D; ++j) m += in[off + j];
            m /= D;
            double v = 0.0;
            for (int j = 0; j < D; ++j) {
                const double t = in[off + j] - m;
                v += t * t;
            }
            v /= D;
            const double inv = 1.0 / std::sqrt(v + eps);
            for (int j = 0; j < D; ++j)
                out[off + j] = g[static_cast<std::size_t>(j)] * (in[off + j] - m) * inv + bt[static_cast<std::size_t>(j)];
        }
    };
    std::vector<double> out(x.size());
    kernel(x.node()->data, gamma.node()->data, beta.node()->data, out);
    Tensor y = detail::make_op("layer_norm", x.shape(), std::move(out), {x, gamma, beta});
    Node* yn = y.node().get();
    if (y.requires_grad()) {
        yn->backward_fn = [N, D, eps](Node& self) {
            Node& xn = *self.parents[0];
            Node& gn = *self.parents[1];
            Node& bn = *self.parents[2];
            for (int i = 0; i < N; ++i) {
                const std::size_t off = static_cast<std::size_t>(i) * D;
                double m = 0.0;
                for (int j = 0; j < D; ++j) m += xn.data[off + j];
                m /= D;
                double v = 0.0;
                for (int j = 0; j < D; ++j) {
                    const double t = xn.data[off + j] - m;
                    v += t * t;
                }
                v /= D;
                const double inv = 1.0 / std::sqrt(v + eps);
                double sum_dxh = 0.0, sum_dxh_xh = 0.0;
                for (int j = 0; j < D; ++j) {
                    const double dy = self.grad[off + j];
                    const double xh = (xn.data[off + j] - m) * inv;
                    const double dxh = dy * gn.data[static_cast<std::size_t>(j)];
                    sum_dxh += dxh;
                    sum_dxh_xh += dxh * xh;
                    if (gn.requires_grad) gn.grad[static_cast<std::size_t>(j)] += dy * xh;
                    if (bn.requires_grad) bn.grad[static_cast<std::size_t>(j)] += dy;
                }
                if (xn.requires_grad) {
                    for (int j = 0; j < D; ++j) {
                        const double xh = (xn.data[off + j] - m) * inv;
                        const double dxh = self.grad[off + j] * gn.data[static_cast<std::size_t>(j)];
                        xn.grad[off + j] += inv / D * (D * dxh - sum_dxh - xh * sum_dxh_xh);
                    }
                }
            }
        };
    }
    yn->recompute_fn = [kernel](Node& self) {
        std::vector<double> out(self.data.size());
        kernel(self.parents[0]->data, self.parents[1]->data, self.parents[2]->data, out);
        finish_recompute(self, std::move(out));
    };
    return y;
}

}  // namespace dfdepth
