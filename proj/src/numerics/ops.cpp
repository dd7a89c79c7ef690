#include "tempora/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "tempora/kernels/kernels.hpp"

namespace tempora::numerics {
namespace {

[[noreturn]] void shape_error(std::string_view op, const std::string& detail) {
    throw std::invalid_argument(std::string(op) + ": " + detail);
}

Tape* same_tape(std::string_view op, std::initializer_list<Var> vars) {
    Tape* t = vars.begin()->tape;
    for (const Var& v : vars) {
        if (!v.tape || v.tape != t) shape_error(op, "operands live on different tapes");
    }
    return t;
}

void require_same_shape(std::string_view op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        shape_error(op, "shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    }
}

const kernels::KernelTable& k() { return kernels::active(); }

// Shape [B, T, C] accessors; rank-2 [T, C] is treated as B = 1.
struct TimeShape {
    std::size_t batch, time, channels;
};

TimeShape time_shape(std::string_view op, const Shape& s) {
    if (s.size() == 3) return {s[0], s[1], s[2]};
    if (s.size() == 2) return {1, s[0], s[1]};
    shape_error(op, "expected [T,C] or [B,T,C], got " + shape_string(s));
}

} // namespace

Activation parse_activation(std::string_view name) {
    if (name == "identity") return Activation::Identity;
    if (name == "sigmoid") return Activation::Sigmoid;
    if (name == "tanh") return Activation::Tanh;
    if (name == "relu") return Activation::Relu;
    if (name == "exp") return Activation::Exp;
    if (name == "log") return Activation::Log;
    if (name == "square") return Activation::Square;
    throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

std::string_view activation_name(Activation a) {
    switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Exp: return "exp";
    case Activation::Log: return "log";
    case Activation::Square: return "square";
    }
    return "identity";
}

Var matmul(Var a, Var b) {
    Tape* tape = same_tape("matmul", {a, b});
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.rank() < 1 || bv.rank() != 2 || av.last_extent() != bv.shape()[0]) {
        shape_error("matmul", "cannot multiply " + shape_string(av.shape()) + " by " + shape_string(bv.shape()));
    }
    const std::size_t kk = bv.shape()[0];
    const std::size_t n = bv.shape()[1];
    const std::size_t m = av.size() / kk;
    Shape out_shape = av.shape();
    if (out_shape.size() == 1) out_shape.insert(out_shape.begin(), 1);
    out_shape.back() = n;
    Tensor out(out_shape, 0.0);
    k().gemm_nn(m, n, kk, av.data(), bv.data(), out.data());
    return tape->record(OpKind::MatMul, std::move(out), {a.id, b.id}, [m, n, kk, a, b](Tape& t, NodeId self) {
        const Tensor& g = t.grad_buffer(self);
        if (t.requires_grad(a.id)) k().gemm_nt(m, kk, n, g.data(), t.value(b.id).data(), t.grad_buffer(a.id).data());
        if (t.requires_grad(b.id)) k().gemm_tn(kk, n, m, t.value(a.id).data(), g.data(), t.grad_buffer(b.id).data());
    });
}

Var conv1d_causal(Var x, Var kernel, Var bias) {
    Tape* tape = same_tape("conv1d_causal", {x, kernel, bias});
    const Tensor& xv = x.value();
    const Tensor& kv = kernel.value();
    const Tensor& bv = bias.value();
    const TimeShape ts = time_shape("conv1d_causal", xv.shape());
    if (kv.rank() != 3 || kv.shape()[1] != ts.channels) {
        shape_error("conv1d_causal", "kernel " + shape_string(kv.shape()) + " incompatible with input " +
                                         shape_string(xv.shape()));
    }
    const std::size_t width = kv.shape()[0];
    const std::size_t cin = ts.channels;
    const std::size_t cout = kv.shape()[2];
    if (bv.size() != cout) {
        shape_error("conv1d_causal", "bias " + shape_string(bv.shape()) + " does not match c_out " + std::to_string(cout));
    }
    Shape out_shape = xv.shape();
    out_shape.back() = cout;
    Tensor out(out_shape, 0.0);
    for (std::size_t b = 0; b < ts.batch; ++b) {
        double* ob = out.data() + b * ts.time * cout;
        const double* xb = xv.data() + b * ts.time * cin;
        for (std::size_t t = 0; t < ts.time; ++t) std::copy_n(bv.data(), cout, ob + t * cout);
        for (std::size_t j = 0; j < width && j < ts.time; ++j) {
            k().gemm_nn(ts.time - j, cout, cin, xb, kv.data() + j * cin * cout, ob + j * cout);
        }
    }
    return tape->record(OpKind::Conv1dCausal, std::move(out), {x.id, kernel.id, bias.id},
                        [ts, width, cin, cout, x, kernel, bias](Tape& t, NodeId self) {
                            const Tensor& g = t.grad_buffer(self);
                            const Tensor& xv = t.value(x.id);
                            const Tensor& kv = t.value(kernel.id);
                            const bool gx = t.requires_grad(x.id);
                            const bool gk = t.requires_grad(kernel.id);
                            const bool gb = t.requires_grad(bias.id);
                            for (std::size_t b = 0; b < ts.batch; ++b) {
                                const double* gbp = g.data() + b * ts.time * cout;
                                const double* xb = xv.data() + b * ts.time * cin;
                                for (std::size_t j = 0; j < width && j < ts.time; ++j) {
                                    const std::size_t rows = ts.time - j;
                                    if (gx) {
                                        k().gemm_nt(rows, cin, cout, gbp + j * cout, kv.data() + j * cin * cout,
                                                    t.grad_buffer(x.id).data() + b * ts.time * cin);
                                    }
                                    if (gk) {
                                        k().gemm_tn(cin, cout, rows, xb, gbp + j * cout,
                                                    t.grad_buffer(kernel.id).data() + j * cin * cout);
                                    }
                                }
                                if (gb) {
                                    double* db = t.grad_buffer(bias.id).data();
                                    for (std::size_t r = 0; r < ts.time; ++r) k().axpy(cout, 1.0, gbp + r * cout, db);
                                }
                            }
                        });
}

Var elementwise(Var x, Activation kind) {
    Tape* tape = x.tape;
    const Tensor& xv = x.value();
    Tensor out(xv.shape(), 0.0);
    const std::size_t n = xv.size();
    const double* in = xv.data();
    double* o = out.data();
    switch (kind) {
    case Activation::Identity: std::copy_n(in, n, o); break;
    case Activation::Sigmoid:
        for (std::size_t i = 0; i < n; ++i) {
            // Split by sign so exp never overflows.
            o[i] = in[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-in[i])) : std::exp(in[i]) / (1.0 + std::exp(in[i]));
        }
        break;
    case Activation::Tanh:
        for (std::size_t i = 0; i < n; ++i) o[i] = std::tanh(in[i]);
        break;
    case Activation::Relu:
        for (std::size_t i = 0; i < n; ++i) o[i] = in[i] > 0.0 ? in[i] : 0.0;
        break;
    case Activation::Exp:
        for (std::size_t i = 0; i < n; ++i) o[i] = std::exp(in[i]);
        break;
    case Activation::Log:
        for (std::size_t i = 0; i < n; ++i) {
            if (!(in[i] > 0.0)) {
                throw std::invalid_argument("log: nonpositive input " + std::to_string(in[i]) + " at index " +
                                            std::to_string(i));
            }
            o[i] = std::log(in[i]);
        }
        break;
    case Activation::Square: k().mul(n, in, in, o); break;
    }
    return tape->record(OpKind::Elementwise, std::move(out), {x.id}, [kind, x](Tape& t, NodeId self) {
        const Tensor& g = t.grad_buffer(self);
        const Tensor& y = t.value(self);
        const Tensor& xv = t.value(x.id);
        Tensor& gx = t.grad_buffer(x.id);
        const std::size_t n = g.size();
        switch (kind) {
        case Activation::Identity: k().axpy(n, 1.0, g.data(), gx.data()); break;
        case Activation::Sigmoid:
            for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
            break;
        case Activation::Tanh:
            for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] * (1.0 - y[i] * y[i]);
            break;
        case Activation::Relu:
            for (std::size_t i = 0; i < n; ++i) gx[i] += xv[i] > 0.0 ? g[i] : 0.0;
            break;
        case Activation::Exp: k().mul_acc(n, g.data(), y.data(), gx.data()); break;
        case Activation::Log:
            for (std::size_t i = 0; i < n; ++i) gx[i] += g[i] / xv[i];
            break;
        case Activation::Square:
            for (std::size_t i = 0; i < n; ++i) gx[i] += 2.0 * g[i] * xv[i];
            break;
        }
    });
}

Var softmax_lastdim(Var x) {
    const Tensor& xv = x.value();
    const std::size_t n = xv.last_extent();
    const std::size_t rows = xv.size() / n;
    Tensor out(xv.shape(), 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* in = xv.data() + r * n;
        double* o = out.data() + r * n;
        const double mx = *std::max_element(in, in + n);
        double z = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            o[i] = std::exp(in[i] - mx);
            z += o[i];
        }
        for (std::size_t i = 0; i < n; ++i) o[i] /= z;
    }
    return x.tape->record(OpKind::Softmax, std::move(out), {x.id}, [n, rows, x](Tape& t, NodeId self) {
        const Tensor& g = t.grad_buffer(self);
        const Tensor& y = t.value(self);
        Tensor& gx = t.grad_buffer(x.id);
        for (std::size_t r = 0; r < rows; ++r) {
            const double* gr = g.data() + r * n;
            const double* yr = y.data() + r * n;
            const double s = k().dot(n, gr, yr);
            double* out = gx.data() + r * n;
            for (std::size_t i = 0; i < n; ++i) out[i] += yr[i] * (gr[i] - s);
        }
    });
}

Var log_softmax_lastdim(Var x) {
    const Tensor& xv = x.value();
    const std::size_t n = xv.last_extent();
    const std::size_t rows = xv.size() / n;
    Tensor out(xv.shape(), 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* in = xv.data() + r * n;
        double* o = out.data() + r * n;
        const double mx = *std::max_element(in, in + n);
        double z = 0.0;
        for (std::size_t i = 0; i < n; ++i) z += std::exp(in[i] - mx);
        const double lz = mx + std::log(z);
        for (std::size_t i = 0; i < n; ++i) o[i] = in[i] - lz;
    }
    return x.tape->record(OpKind::LogSoftmax, std::move(out), {x.id}, [n, rows, x](Tape& t, NodeId self) {
        const Tensor& g = t.grad_buffer(self);
        const Tensor& y = t.value(self);
        Tensor& gx = t.grad_buffer(x.id);
        for (std::size_t r = 0; r < rows; ++r) {
            const double* gr = g.data() + r * n;
            const double* yr = y.data() + r * n;
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += gr[i];
            double* out = gx.data() + r * n;
            for (std::size_t i = 0; i < n; ++i) out[i] += gr[i] - std::exp(yr[i]) * s;
        }
    });
}

Var add(Var a, Var b) {
    Tape* tape = same_tape("add", {a, b});
    require_same_shape("add", a.value(), b.value());
    Tensor out(a.shape(), 0.0);
    k().add(out.size(), a.value().data(), b.value().data(), out.data());
    return tape->record(OpKind::Add, std::move(out), {a.id, b.id}, [a, b](Tape& t, NodeId self) {
        const Tensor& g = t.grad_buffer(self);
        if (t.requires_grad(a.id)) k().axpy(g.size(), 1.0, g.data(), t.grad_buffer(a.id).data());
        if (t.requires_grad(b.id)) k().axpy(g.size(), 1.0, g.data(), t.grad_buffer(b.id).data());
    });
}

Var sub(Var a, Var b) {
    Tape* tape = same_tape("sub", {a, b});
    require_same_shape("sub", a.value(), b.value());
    Tensor out = a.value();
    k().axpy(out.size(), -1.0, b.value().data(), out.data());
    return tape->record(OpKind::Sub, std::move(out), {a.id, b.id}, [a, b](Tape& t, NodeId self) {
        const Tensor& g = t.grad_buffer(self);
        if (t.requires_grad(a.id)) k().axpy(g.size(), 1.0, g.data(), t.grad_buffer(a.id).data());
        if (t.requires_grad(b.id)) k().axpy(g.size(), -1.0, g.data(), t.grad_buffer(b.id).data());
    });
}

Var mul(Var a, Var b) {
    Tape* tape = same_tape("mul", {a, b});
    require_same_shape("mul", a.value(), b.value());
    Tensor out(a.shape(), 0.0);
    k().mul(out.size(), a.value().data(), b.value().data(), out.data());
    return tape->record(OpKind::Mul, std::move(out), {a.id, b.id}, [a, b](Tape& t, NodeId self) {
        const Tensor& g = t.grad_buffer(self);
        if (t.requires_grad(a.id)) k().mul_acc(g.size(), g.data(), t.value(b.id).data(), t.grad_buffer(a.id).data());
        if (t.requires_grad(b.id)) k().mul_acc(g.size(), g.data(), t.value(a.id).data(), t.grad_buffer(b.id).data());
    });
}

Var scale(Var x, double c) {
    Tensor out(x.shape(), 0.0);
    k().axpy(out.size(), c, x.value().data(), out.data());
    return x.tape->record(OpKind::Scale, std::move(out), {x.id}, [c, x](Tape& t, NodeId self) {
        const Tensor& g = t.grad_buffer(self);
        k().axpy(g.size(), c, g.data(), t.grad_buffer(x.id).data());
    });
}

Var add_row(Var x, Var row) {
    Tape* tape = same_tape("add_row", {x, row});
    const Tensor& xv = x.value();
    const Tensor& rv = row.value();
    const std::size_t n = xv.last_extent();
    if (rv.size() != n) {
        shape_error("add_row", "row " + shape_string(rv.shape()) + " does not match last axis of " +
                                   shape_string(xv.shape()));
    }
    const std::size_t rows = xv.size() / n;
    Tensor out(xv.shape(), 0.0);
    for (std::size_t r = 0; r < rows; ++r) k().add(n, xv.data() + r * n, rv.data(), out.data() + r * n);
    return tape->record(OpKind::AddRow, std::move(out), {x.id, row.id}, [n, rows, x, row](Tape& t, NodeId self) {
        const Tensor& g = t.grad_buffer(self);
        if (t.requires_grad(x.id)) k().axpy(g.size(), 1.0, g.data(), t.grad_buffer(x.id).data());
        if (t.requires_grad(row.id)) {
            double* gr = t.grad_buffer(row.id).data();
            for (std::size_t r = 0; r < rows; ++r) k().axpy(n, 1.0, g.data() + r * n, gr);
        }
    });
}

Var broadcast_rows(Var row, std::size_t rows) {
    const Tensor& rv = row.value();
    const std::size_t n = rv.size();
    Tensor out(Shape{rows, n}, 0.0);
    for (std::size_t r = 0; r < rows; ++r) std::copy_n(rv.data(), n, out.data() + r * n);
    return row.tape->record(OpKind::BroadcastRows, std::move(out), {row.id}, [n, rows, row](Tape& t, NodeId self) {
        const Tensor& g = t.grad_buffer(self);
        double* gr = t.grad_buffer(row.id).data();
        for (std::size_t r = 0; r < rows; ++r) k().axpy(n, 1.0, g.data() + r * n, gr);
    });
}

Var concat_lastdim(std::span<const Var> parts) {
    if (parts.empty()) shape_error("concat_lastdim", "no operands");
    Tape* tape = parts[0].tape;
    Shape lead = parts[0].shape();
    lead.pop_back();
    std::vector<std::size_t> widths;
    std::size_t total = 0;
    std::vector<NodeId> ids;
    for (const Var& p : parts) {
        if (p.tape != tape) shape_error("concat_lastdim", "operands live on different tapes");
        Shape s = p.shape();
        const std::size_t w = s.back();
        s.pop_back();
        if (s != lead) {
            shape_error("concat_lastdim", "leading axes differ: " + shape_string(parts[0].shape()) + " vs " +
                                              shape_string(p.shape()));
        }
        widths.push_back(w);
        total += w;
        ids.push_back(p.id);
    }
    Shape out_shape = lead;
    out_shape.push_back(total);
    Tensor out(out_shape, 0.0);
    const std::size_t rows = out.size() / total;
    std::size_t offset = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const double* src = parts[i].value().data();
        for (std::size_t r = 0; r < rows; ++r) std::copy_n(src + r * widths[i], widths[i], out.data() + r * total + offset);
        offset += widths[i];
    }
    return tape->record(OpKind::ConcatLast, std::move(out), ids, [widths, total, rows, ids](Tape& t, NodeId self) {
        const Tensor& g = t.grad_buffer(self);
        std::size_t offset = 0;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (t.requires_grad(ids[i])) {
                double* dst = t.grad_buffer(ids[i]).data();
                for (std::size_t r = 0; r < rows; ++r) {
                    k().axpy(widths[i], 1.0, g.data() + r * total + offset, dst + r * widths[i]);
                }
            }
            offset += widths[i];
        }
    });
}

Var slice_lastdim(Var x, std::size_t begin, std::size_t end) {
    const Tensor& xv = x.value();
    const std::size_t n = xv.last_extent();
    if (begin >= end || end > n) {
        shape_error("slice_lastdim", "range [" + std::to_string(begin) + "," + std::to_string(end) + ") outside " +
                                         shape_string(xv.shape()));
    }
    const std::size_t w = end - begin;
    const std::size_t rows = xv.size() / n;
    Shape out_shape = xv.shape();
    if (out_shape.empty()) out_shape.push_back(1);
    out_shape.back() = w;
    Tensor out(out_shape, 0.0);
    for (std::size_t r = 0; r < rows; ++r) std::copy_n(xv.data() + r * n + begin, w, out.data() + r * w);
    return x.tape->record(OpKind::SliceLast, std::move(out), {x.id}, [n, w, rows, begin, x](Tape& t, NodeId self) {
        const Tensor& g = t.grad_buffer(self);
        double* dst = t.grad_buffer(x.id).data();
        for (std::size_t r = 0; r < rows; ++r) k().axpy(w, 1.0, g.data() + r * w, dst + r * n + begin);
    });
}

Var concat_time(std::span<const Var> parts) {
    if (parts.empty()) shape_error("concat_time", "no operands");
    Tape* tape = parts[0].tape;
    const TimeShape first = time_shape("concat_time", parts[0].shape());
    std::vector<std::size_t> lengths;
    std::vector<NodeId> ids;
    std::size_t total = 0;
    for (const Var& p : parts) {
        if (p.tape != tape) shape_error("concat_time", "operands live on different tapes");
        const TimeShape ts = time_shape("concat_time", p.shape());
        if (ts.batch != first.batch || ts.channels != first.channels || p.shape().size() != parts[0].shape().size()) {
            shape_error("concat_time", "incompatible " + shape_string(parts[0].shape()) + " and " +
                                           shape_string(p.shape()));
        }
        lengths.push_back(ts.time);
        ids.push_back(p.id);
        total += ts.time;
    }
    const std::size_t B = first.batch;
    const std::size_t C = first.channels;
    Shape out_shape = parts[0].shape().size() == 3 ? Shape{B, total, C} : Shape{total, C};
    Tensor out(out_shape, 0.0);
    std::size_t offset = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const double* src = parts[i].value().data();
        for (std::size_t b = 0; b < B; ++b) {
            std::copy_n(src + b * lengths[i] * C, lengths[i] * C, out.data() + (b * total + offset) * C);
        }
        offset += lengths[i];
    }
    return tape->record(OpKind::ConcatTime, std::move(out), ids, [B, C, total, lengths, ids](Tape& t, NodeId self) {
        const Tensor& g = t.grad_buffer(self);
        std::size_t offset = 0;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (t.requires_grad(ids[i])) {
                double* dst = t.grad_buffer(ids[i]).data();
                for (std::size_t b = 0; b < B; ++b) {
                    k().axpy(lengths[i] * C, 1.0, g.data() + (b * total + offset) * C, dst + b * lengths[i] * C);
                }
            }
            offset += lengths[i];
        }
    });
}

Var slice_time(Var x, std::size_t begin, std::size_t end) {
    const Tensor& xv = x.value();
    const TimeShape ts = time_shape("slice_time", xv.shape());
    if (begin >= end || end > ts.time) {
        shape_error("slice_time", "range [" + std::to_string(begin) + "," + std::to_string(end) + ") outside " +
                                      shape_string(xv.shape()));
    }
    const std::size_t len = end - begin;
    Shape out_shape = xv.rank() == 3 ? Shape{ts.batch, len, ts.channels} : Shape{len, ts.channels};
    Tensor out(out_shape, 0.0);
    const std::size_t C = ts.channels;
    for (std::size_t b = 0; b < ts.batch; ++b) {
        std::copy_n(xv.data() + (b * ts.time + begin) * C, len * C, out.data() + b * len * C);
    }
    return x.tape->record(OpKind::SliceTime, std::move(out), {x.id}, [ts, begin, len, x](Tape& t, NodeId self) {
        const Tensor& g = t.grad_buffer(self);
        double* dst = t.grad_buffer(x.id).data();
        const std::size_t C = ts.channels;
        for (std::size_t b = 0; b < ts.batch; ++b) {
            k().axpy(len * C, 1.0, g.data() + b * len * C, dst + (b * ts.time + begin) * C);
        }
    });
}

Var at_time(Var x, std::size_t t) {
    const TimeShape ts = time_shape("at_time", x.shape());
    return reshape(slice_time(x, t, t + 1), Shape{ts.batch, ts.channels});
}

Var stack_time(std::span<const Var> steps) {
    if (steps.empty()) shape_error("stack_time", "no operands");
    std::vector<Var> expanded;
    expanded.reserve(steps.size());
    for (const Var& s : steps) {
        if (s.shape().size() != 2) shape_error("stack_time", "expected [B,C], got " + shape_string(s.shape()));
        expanded.push_back(reshape(s, Shape{s.shape()[0], 1, s.shape()[1]}));
    }
    return concat_time(expanded);
}

Var reshape(Var x, Shape shape) {
    if (shape_size(shape) != x.value().size()) {
        shape_error("reshape", "cannot view " + shape_string(x.shape()) + " as " + shape_string(shape));
    }
    return x.tape->record(OpKind::Reshape, x.value().reshaped(std::move(shape)), {x.id}, [x](Tape& t, NodeId self) {
        const Tensor& g = t.grad_buffer(self);
        k().axpy(g.size(), 1.0, g.data(), t.grad_buffer(x.id).data());
    });
}

Var row_dot(Var keys, Var q) {
    Tape* tape = same_tape("row_dot", {keys, q});
    const Tensor& kv = keys.value();
    const Tensor& qv = q.value();
    if (kv.rank() != 3 || qv.rank() != 2 || kv.shape()[0] != qv.shape()[0] || kv.shape()[2] != qv.shape()[1]) {
        shape_error("row_dot", "keys " + shape_string(kv.shape()) + " incompatible with query " + shape_string(qv.shape()));
    }
    const std::size_t B = kv.shape()[0], n = kv.shape()[1], d = kv.shape()[2];
    Tensor out(Shape{B, n}, 0.0);
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t j = 0; j < n; ++j) out[b * n + j] = k().dot(d, kv.data() + (b * n + j) * d, qv.data() + b * d);
    }
    return tape->record(OpKind::RowDot, std::move(out), {keys.id, q.id}, [B, n, d, keys, q](Tape& t, NodeId self) {
        const Tensor& g = t.grad_buffer(self);
        const Tensor& kv = t.value(keys.id);
        const Tensor& qv = t.value(q.id);
        const bool gk = t.requires_grad(keys.id);
        const bool gq = t.requires_grad(q.id);
        for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t j = 0; j < n; ++j) {
                const double gj = g[b * n + j];
                if (gk) k().axpy(d, gj, qv.data() + b * d, t.grad_buffer(keys.id).data() + (b * n + j) * d);
                if (gq) k().axpy(d, gj, kv.data() + (b * n + j) * d, t.grad_buffer(q.id).data() + b * d);
            }
        }
    });
}

Var weighted_pool(Var weights, Var values) {
    Tape* tape = same_tape("weighted_pool", {weights, values});
    const Tensor& wv = weights.value();
    const Tensor& vv = values.value();
    if (wv.rank() != 2 || vv.rank() != 3 || wv.shape()[0] != vv.shape()[0] || wv.shape()[1] != vv.shape()[1]) {
        shape_error("weighted_pool", "weights " + shape_string(wv.shape()) + " incompatible with values " +
                                         shape_string(vv.shape()));
    }
    const std::size_t B = vv.shape()[0], n = vv.shape()[1], d = vv.shape()[2];
    Tensor out(Shape{B, d}, 0.0);
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t j = 0; j < n; ++j) k().axpy(d, wv[b * n + j], vv.data() + (b * n + j) * d, out.data() + b * d);
    }
    return tape->record(OpKind::WeightedPool, std::move(out), {weights.id, values.id},
                        [B, n, d, weights, values](Tape& t, NodeId self) {
                            const Tensor& g = t.grad_buffer(self);
                            const Tensor& wv = t.value(weights.id);
                            const Tensor& vv = t.value(values.id);
                            const bool gw = t.requires_grad(weights.id);
                            const bool gv = t.requires_grad(values.id);
                            for (std::size_t b = 0; b < B; ++b) {
                                for (std::size_t j = 0; j < n; ++j) {
                                    if (gw) {
                                        t.grad_buffer(weights.id)[b * n + j] +=
                                            k().dot(d, g.data() + b * d, vv.data() + (b * n + j) * d);
                                    }
                                    if (gv) {
                                        k().axpy(d, wv[b * n + j], g.data() + b * d,
                                                 t.grad_buffer(values.id).data() + (b * n + j) * d);
                                    }
                                }
                            }
                        });
}

Var gather_lastdim(Var x, std::vector<std::size_t> indices) {
    const Tensor& xv = x.value();
    const std::size_t n = xv.last_extent();
    if (indices.empty()) shape_error("gather_lastdim", "empty index list");
    for (std::size_t i : indices) {
        if (i >= n) shape_error("gather_lastdim", "index " + std::to_string(i) + " outside " + shape_string(xv.shape()));
    }
    const std::size_t m = indices.size();
    const std::size_t rows = xv.size() / n;
    Shape out_shape = xv.shape();
    if (out_shape.empty()) out_shape.push_back(1);
    out_shape.back() = m;
    Tensor out(out_shape, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < m; ++j) out[r * m + j] = xv[r * n + indices[j]];
    }
    return x.tape->record(OpKind::GatherLast, std::move(out), {x.id},
                          [n, m, rows, idx = std::move(indices), x](Tape& t, NodeId self) {
                              const Tensor& g = t.grad_buffer(self);
                              Tensor& gx = t.grad_buffer(x.id);
                              for (std::size_t r = 0; r < rows; ++r) {
                                  for (std::size_t j = 0; j < m; ++j) gx[r * n + idx[j]] += g[r * m + j];
                              }
                          });
}

Var gather_rows(Var table, std::vector<std::size_t> indices) {
    const Tensor& tv = table.value();
    if (tv.rank() != 2) shape_error("gather_rows", "table must be rank 2, got " + shape_string(tv.shape()));
    if (indices.empty()) shape_error("gather_rows", "empty index list");
    const std::size_t V = tv.shape()[0], E = tv.shape()[1];
    for (std::size_t i : indices) {
        if (i >= V) shape_error("gather_rows", "row " + std::to_string(i) + " outside " + shape_string(tv.shape()));
    }
    Tensor out(Shape{indices.size(), E}, 0.0);
    for (std::size_t r = 0; r < indices.size(); ++r) std::copy_n(tv.data() + indices[r] * E, E, out.data() + r * E);
    return table.tape->record(OpKind::GatherRows, std::move(out), {table.id},
                              [E, idx = std::move(indices), table](Tape& t, NodeId self) {
                                  const Tensor& g = t.grad_buffer(self);
                                  double* gt = t.grad_buffer(table.id).data();
                                  for (std::size_t r = 0; r < idx.size(); ++r) k().axpy(E, 1.0, g.data() + r * E, gt + idx[r] * E);
                              });
}

Var select_per_row(Var x, std::vector<std::size_t> index) {
    const Tensor& xv = x.value();
    if (xv.rank() != 2 || xv.shape()[0] != index.size()) {
        shape_error("select_per_row", "expected [B,K] with B=" + std::to_string(index.size()) + ", got " +
                                          shape_string(xv.shape()));
    }
    const std::size_t B = xv.shape()[0], K = xv.shape()[1];
    Tensor out(Shape{B}, 0.0);
    for (std::size_t b = 0; b < B; ++b) {
        if (index[b] >= K) shape_error("select_per_row", "index " + std::to_string(index[b]) + " >= " + std::to_string(K));
        out[b] = xv[b * K + index[b]];
    }
    return x.tape->record(OpKind::SelectPerRow, std::move(out), {x.id},
                          [K, idx = std::move(index), x](Tape& t, NodeId self) {
                              const Tensor& g = t.grad_buffer(self);
                              Tensor& gx = t.grad_buffer(x.id);
                              for (std::size_t b = 0; b < idx.size(); ++b) gx[b * K + idx[b]] += g[b];
                          });
}

Var sum(Var x) {
    const Tensor& xv = x.value();
    double s = 0.0;
    for (double v : xv.values()) s += v;
    return x.tape->record(OpKind::Sum, Tensor::scalar(s), {x.id}, [x](Tape& t, NodeId self) {
        const double g = t.grad_buffer(self)[0];
        for (double& v : t.grad_buffer(x.id).values()) v += g;
    });
}

Var mean(Var x) {
    const Tensor& xv = x.value();
    const double n = static_cast<double>(xv.size());
    double s = 0.0;
    for (double v : xv.values()) s += v;
    return x.tape->record(OpKind::Mean, Tensor::scalar(s / n), {x.id}, [n, x](Tape& t, NodeId self) {
        const double g = t.grad_buffer(self)[0] / n;
        for (double& v : t.grad_buffer(x.id).values()) v += g;
    });
}

Var time_kernel(Var tau, Var bump, std::vector<double> deltas, std::size_t period) {
    Tape* tape = same_tape("time_kernel", {tau, bump});
    const double tv = tau.item();
    const double bv = bump.item();
    if (!(tv > 0.0)) throw std::invalid_argument("time_kernel: tau must be positive, got " + std::to_string(tv));
    if (deltas.empty()) shape_error("time_kernel", "no offsets");
    Tensor out(Shape{deltas.size()}, 0.0);
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        const bool on_period = period > 0 && std::fmod(deltas[i], static_cast<double>(period)) == 0.0;
        out[i] = std::exp(-deltas[i] / tv) + (on_period ? bv : 0.0);
    }
    return tape->record(OpKind::TimeKernel, std::move(out), {tau.id, bump.id},
                        [dts = std::move(deltas), period, tau, bump](Tape& t, NodeId self) {
                            const Tensor& g = t.grad_buffer(self);
                            const double tv = t.value(tau.id).item();
                            double dtau = 0.0, dbump = 0.0;
                            for (std::size_t i = 0; i < dts.size(); ++i) {
                                dtau += g[i] * std::exp(-dts[i] / tv) * dts[i] / (tv * tv);
                                if (period > 0 && std::fmod(dts[i], static_cast<double>(period)) == 0.0) dbump += g[i];
                            }
                            if (t.requires_grad(tau.id)) t.grad_buffer(tau.id)[0] += dtau;
                            if (t.requires_grad(bump.id)) t.grad_buffer(bump.id)[0] += dbump;
                        });
}

Var stop_gradient(Var x) {
    return x.tape->constant(x.value());
}

} // namespace tempora::numerics
