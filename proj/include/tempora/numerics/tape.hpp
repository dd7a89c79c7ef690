#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "tempora/numerics/tensor.hpp"

namespace tempora::numerics {

using NodeId = std::uint32_t;

class Tape;

// Handle to a value recorded on a tape. Cheap to copy; only valid while the
// owning tape is alive.
struct Var {
    Tape* tape = nullptr;
    NodeId id = 0;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    double item() const { return value().item(); }
};

enum class OpKind {
    Leaf,
    Constant,
    MatMul,
    Conv1dCausal,
    Elementwise,
    Softmax,
    LogSoftmax,
    Add,
    Sub,
    Mul,
    Scale,
    AddRow,
    BroadcastRows,
    ConcatLast,
    SliceLast,
    ConcatTime,
    SliceTime,
    Reshape,
    RowDot,
    WeightedPool,
    GatherLast,
    GatherRows,
    SelectPerRow,
    Sum,
    Mean,
    TimeKernel,
};

std::string_view op_name(OpKind kind);

// Records one forward computation in order and replays it in reverse.
// A tape is used for a single step and then discarded; it is not
// thread-safe, but distinct tapes are independent.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, NodeId self)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // A differentiable input (parameter or probe point).
    Var leaf(Tensor value);
    // A value no gradient flows into.
    Var constant(Tensor value);

    // Appends a node. Parents must already be on this tape.
    Var record(OpKind kind, Tensor value, std::vector<NodeId> parents, BackwardFn backward);

    // Reverse accumulation from a scalar node. Gradient buffers are reset
    // first, so calling it twice gives identical results.
    void backward(Var loss);

    const Tensor& value(NodeId id) const { return nodes_[id].value; }
    // Gradient of the last backward() loss; zeros for nodes that do not
    // influence it. Requires a prior backward().
    const Tensor& grad(Var v) const;
    bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }
    OpKind kind(NodeId id) const { return nodes_[id].kind; }
    const std::vector<NodeId>& parents(NodeId id) const { return nodes_[id].parents; }
    std::size_t size() const { return nodes_.size(); }

    // Mutable gradient buffer; for use inside backward functions only.
    Tensor& grad_buffer(NodeId id) { return grads_[id]; }

private:
    struct Node {
        OpKind kind;
        Tensor value;
        std::vector<NodeId> parents;
        BackwardFn backward;
        bool requires_grad;
    };

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
};

} // namespace tempora::numerics
