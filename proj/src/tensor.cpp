#include "dfdepth/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace dfdepth {

namespace {

std::atomic<Precision> g_precision{Precision::f64};
std::atomic<std::uint64_t> g_next_id{1};

}  // namespace

void set_precision(Precision p) { g_precision.store(p); }
Precision current_precision() { return g_precision.load(); }

std::size_t numel(const Shape& shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

namespace detail {

void quantize_inplace(std::vector<double>& values) {
    if (g_precision.load() == Precision::f32) {
        for (double& v : values) v = static_cast<double>(static_cast<float>(v));
    }
}

void check_finite(const char* op, const std::vector<double>& values) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw std::runtime_error(std::string("non-finite value in output of ") + op);
        }
    }
}

namespace {

std::shared_ptr<Node> new_node(const char* op, Shape shape, std::vector<double> data,
                               bool requires_grad) {
    if (numel(shape) != data.size()) {
        throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                    " does not match shape " + shape_str(shape));
    }
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("non-positive dimension in shape " + shape_str(shape));
    }
    auto n = std::make_shared<Node>();
    n->id = g_next_id.fetch_add(1);
    n->op = op;
    n->shape = std::move(shape);
    n->data = std::move(data);
    n->requires_grad = requires_grad;
    if (requires_grad) n->grad.assign(n->data.size(), 0.0);
    return n;
}

}  // namespace

Tensor make_op(const char* op, Shape shape, std::vector<double> data,
               const std::vector<Tensor>& parents) {
    quantize_inplace(data);
    check_finite(op, data);
    bool rg = false;
    for (const Tensor& p : parents) rg = rg || p.requires_grad();
    Tensor t = make_op_tensor(op, std::move(shape), std::move(data), parents);
    t.node()->requires_grad = rg;
    if (rg) t.node()->grad.assign(t.node()->data.size(), 0.0);
    return t;
}

}  // namespace detail

Tensor make_op_tensor(const char* op, Shape shape, std::vector<double> data,
                      const std::vector<Tensor>& parents) {
    auto n = detail::new_node(op, std::move(shape), std::move(data), false);
    n->parents.reserve(parents.size());
    for (const Tensor& p : parents) {
        if (!p.defined()) throw std::invalid_argument("undefined tensor passed to op");
        n->parents.push_back(p.node());
    }
    return Tensor(std::move(n));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    std::vector<double> d(numel(shape), 0.0);
    return Tensor(detail::new_node("leaf", std::move(shape), std::move(d), requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    std::vector<double> d(numel(shape), value);
    detail::quantize_inplace(d);
    detail::check_finite("leaf", d);
    return Tensor(detail::new_node("leaf", std::move(shape), std::move(d), requires_grad));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    detail::quantize_inplace(data);
    detail::check_finite("leaf", data);
    return Tensor(detail::new_node("leaf", std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from_data({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }
int Tensor::ndim() const { return static_cast<int>(node_->shape.size()); }

int Tensor::dim(int i) const {
    if (i < 0 || i >= ndim()) throw std::out_of_range("dimension index out of range");
    return node_->shape[static_cast<std::size_t>(i)];
}

std::size_t Tensor::size() const { return node_->data.size(); }
bool Tensor::requires_grad() const { return node_->requires_grad; }

std::span<const double> Tensor::data() const { return node_->data; }

std::span<const double> Tensor::grad() const {
    if (!node_->requires_grad) throw std::logic_error("grad() on tensor without requires_grad");
    return node_->grad;
}

double Tensor::item() const {
    if (size() != 1) throw std::logic_error("item() requires a single-element tensor, got " + shape_str(shape()));
    return node_->data[0];
}

double Tensor::at(std::initializer_list<int> idx) const {
    if (static_cast<int>(idx.size()) != ndim()) {
        throw std::invalid_argument("index rank does not match tensor rank");
    }
    std::size_t flat = 0;
    int axis = 0;
    for (int i : idx) {
        const int d = node_->shape[static_cast<std::size_t>(axis)];
        if (i < 0 || i >= d) throw std::out_of_range("index out of bounds");
        flat = flat * static_cast<std::size_t>(d) + static_cast<std::size_t>(i);
        ++axis;
    }
    return node_->data[flat];
}

void Tensor::set_data(std::vector<double> values) {
    if (!node_->parents.empty()) throw std::logic_error("set_data() is restricted to leaf tensors");
    if (values.size() != node_->data.size()) {
        throw std::invalid_argument("set_data() length mismatch for shape " + shape_str(shape()));
    }
    detail::quantize_inplace(values);
    detail::check_finite("leaf", values);
    node_->data = std::move(values);
}

void Tensor::set_value(std::size_t flat_index, double value) {
    if (!node_->parents.empty()) throw std::logic_error("set_value() is restricted to leaf tensors");
    if (flat_index >= node_->data.size()) throw std::out_of_range("flat index out of bounds");
    if (current_precision() == Precision::f32) value = static_cast<double>(static_cast<float>(value));
    node_->data[flat_index] = value;
}

std::span<double> Tensor::mutable_data() {
    if (!node_->parents.empty()) throw std::logic_error("mutable_data() is restricted to leaf tensors");
    return node_->data;
}

void Tensor::zero_grad() {
    if (node_->requires_grad) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

std::uint64_t Tensor::id() const { return node_->id; }
const char* Tensor::op() const { return node_->op; }

namespace {

// Post-order over parents; emits leaves first.
void topo_collect(const std::shared_ptr<detail::Node>& node,
                  std::unordered_set<const detail::Node*>& seen,
                  std::vector<std::shared_ptr<detail::Node>>& out, bool grad_only) {
    if (!node || seen.count(node.get())) return;
    if (grad_only && !node->requires_grad) return;
    seen.insert(node.get());
    for (const auto& p : node->parents) topo_collect(p, seen, out, grad_only);
    out.push_back(node);
}

}  // namespace

void backward(const Tensor& loss) {
    if (!loss.defined()) throw std::invalid_argument("backward() on undefined tensor");
    if (loss.size() != 1) {
        throw std::invalid_argument("backward() requires a scalar loss, got shape " + shape_str(loss.shape()));
    }
    if (!loss.requires_grad()) return;

    std::unordered_set<const detail::Node*> seen;
    std::vector<std::shared_ptr<detail::Node>> topo;
    topo_collect(loss.node(), seen, topo, /*grad_only=*/true);

    loss.node()->grad[0] += 1.0;
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        detail::Node& n = **it;
        if (n.backward_fn) n.backward_fn(n);
    }
}

ComputationRecord ComputationRecord::from(const Tensor& output) {
    if (!output.defined()) throw std::invalid_argument("record of undefined tensor");
    ComputationRecord r;
    std::unordered_set<const detail::Node*> seen;
    topo_collect(output.node(), seen, r.topo_, /*grad_only=*/false);
    r.entries_.reserve(r.topo_.size());
    for (const auto& n : r.topo_) {
        Entry e;
        e.output_id = n->id;
        e.op = n->op;
        for (const auto& p : n->parents) e.input_ids.push_back(p->id);
        r.entries_.push_back(std::move(e));
    }
    return r;
}

void ComputationRecord::replay() const {
    for (const auto& n : topo_) {
        if (n->recompute_fn) n->recompute_fn(*n);
    }
}

}  // namespace dfdepth
