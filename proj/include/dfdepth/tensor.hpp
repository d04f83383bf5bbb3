#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dfdepth {

// Global numeric width. f64 is the test-suite default; f32 rounds every op
// output (and optimizer update) through IEEE single precision.
enum class Precision { f64, f32 };

void set_precision(Precision p);
Precision current_precision();

using Shape = std::vector<int>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
    std::uint64_t id = 0;
    const char* op = "leaf";
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // sized iff requires_grad
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Backward adds this node's grad contribution into each parent's grad.
    std::function<void(Node&)> backward_fn;
    // Recomputes data from parents; used by ComputationRecord::replay.
    std::function<void(Node&)> recompute_fn;
};

}  // namespace detail

/// N-dimensional real tensor. Value-semantic handle over a shared graph
/// node; operations never mutate their inputs. Non-finite op outputs are a
/// hard error.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    int ndim() const;
    int dim(int i) const;
    std::size_t size() const;
    bool requires_grad() const;

    std::span<const double> data() const;
    std::span<const double> grad() const;
    double item() const;
    double at(std::initializer_list<int> idx) const;

    // Leaf-only mutation (parameter updates, test perturbations).
    void set_data(std::vector<double> values);
    void set_value(std::size_t flat_index, double value);
    std::span<double> mutable_data();

    void zero_grad();

    std::uint64_t id() const;
    const char* op() const;

    std::shared_ptr<detail::Node> node() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

    std::shared_ptr<detail::Node> node_;

    friend Tensor make_op_tensor(const char* op, Shape shape, std::vector<double> data,
                                 const std::vector<Tensor>& parents);
};

// Reverse-mode sweep from a scalar loss. Accumulates d loss / d leaf into the
// grad buffer of every requires_grad tensor reachable from the loss; each
// graph node is visited exactly once.
void backward(const Tensor& loss);

/// Topologically ordered trace of the computation that produced a tensor.
class ComputationRecord {
public:
    struct Entry {
        std::uint64_t output_id;
        const char* op;
        std::vector<std::uint64_t> input_ids;
    };

    static ComputationRecord from(const Tensor& output);

    const std::vector<Entry>& entries() const { return entries_; }
    std::size_t node_count() const { return topo_.size(); }

    // Re-runs every recorded non-leaf forward in topological order.
    // Deterministic kernels make the replay bit-identical.
    void replay() const;

private:
    std::vector<std::shared_ptr<detail::Node>> topo_;  // leaves first
    std::vector<Entry> entries_;
};

namespace detail {

// Shared constructor for op results: derives requires_grad from parents,
// applies the precision policy, and rejects non-finite values.
Tensor make_op(const char* op, Shape shape, std::vector<double> data,
               const std::vector<Tensor>& parents);

void quantize_inplace(std::vector<double>& values);
void check_finite(const char* op, const std::vector<double>& values);

}  // namespace detail

}  // namespace dfdepth
