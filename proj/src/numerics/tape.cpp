#include "tempora/numerics/tape.hpp"

#include <stdexcept>
#include <string>

namespace tempora::numerics {

const Tensor& Var::value() const {
    if (!tape) throw std::logic_error("Var is not bound to a tape");
    return tape->value(id);
}

std::string_view op_name(OpKind kind) {
    switch (kind) {
    case OpKind::Leaf: return "leaf";
    case OpKind::Constant: return "constant";
    case OpKind::MatMul: return "matmul";
    case OpKind::Conv1dCausal: return "conv1d_causal";
    case OpKind::Elementwise: return "elementwise";
    case OpKind::Softmax: return "softmax";
    case OpKind::LogSoftmax: return "log_softmax";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::Scale: return "scale";
    case OpKind::AddRow: return "add_row";
    case OpKind::BroadcastRows: return "broadcast_rows";
    case OpKind::ConcatLast: return "concat_last";
    case OpKind::SliceLast: return "slice_last";
    case OpKind::ConcatTime: return "concat_time";
    case OpKind::SliceTime: return "slice_time";
    case OpKind::Reshape: return "reshape";
    case OpKind::RowDot: return "row_dot";
    case OpKind::WeightedPool: return "weighted_pool";
    case OpKind::GatherLast: return "gather_last";
    case OpKind::GatherRows: return "gather_rows";
    case OpKind::SelectPerRow: return "select_per_row";
    case OpKind::Sum: return "sum";
    case OpKind::Mean: return "mean";
    case OpKind::TimeKernel: return "time_kernel";
    }
    return "unknown";
}

Var Tape::leaf(Tensor value) {
    nodes_.push_back({OpKind::Leaf, std::move(value), {}, nullptr, true});
    return {this, static_cast<NodeId>(nodes_.size() - 1)};
}

Var Tape::constant(Tensor value) {
    nodes_.push_back({OpKind::Constant, std::move(value), {}, nullptr, false});
    return {this, static_cast<NodeId>(nodes_.size() - 1)};
}

Var Tape::record(OpKind kind, Tensor value, std::vector<NodeId> parents, BackwardFn backward) {
    bool needs = false;
    const auto self = static_cast<NodeId>(nodes_.size());
    for (NodeId p : parents) {
        if (p >= self) throw std::logic_error("tape parent recorded after child");
        needs = needs || nodes_[p].requires_grad;
    }
    nodes_.push_back({kind, std::move(value), std::move(parents), needs ? std::move(backward) : nullptr, needs});
    return {this, self};
}

void Tape::backward(Var loss) {
    if (loss.tape != this) throw std::invalid_argument("backward: loss belongs to another tape");
    const Tensor& lv = nodes_[loss.id].value;
    if (lv.size() != 1) {
        throw std::invalid_argument("backward: loss must be scalar, got shape " + shape_string(lv.shape()));
    }
    grads_.clear();
    grads_.reserve(nodes_.size());
    for (const Node& n : nodes_) grads_.emplace_back(n.value.shape(), 0.0);
    grads_[loss.id][0] = 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        const Node& n = nodes_[i];
        if (n.backward) n.backward(*this, static_cast<NodeId>(i));
    }
}

const Tensor& Tape::grad(Var v) const {
    if (grads_.size() <= v.id) throw std::logic_error("grad() before backward()");
    return grads_[v.id];
}

} // namespace tempora::numerics
