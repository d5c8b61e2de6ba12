#include "xmal/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "xmal/error.hpp"

namespace xmal::ad {

const Tensor& Var::value() const { return tape->value(index); }
const Tensor& Var::grad() const { return tape->grad(index); }

Var Tape::constant(Tensor value) {
    nodes_.push_back(Node{std::move(value), {}, {}, {}, false});
    return {this, nodes_.size() - 1};
}

Var Tape::leaf(Tensor value) {
    nodes_.push_back(Node{std::move(value), {}, {}, {}, true});
    return {this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, Backprop backprop) {
    bool needs = false;
    for (auto i : inputs) needs = needs || nodes_[i].requires_grad;
    nodes_.push_back(Node{std::move(value), {}, std::move(inputs),
                          needs ? std::move(backprop) : Backprop{}, needs});
    return {this, nodes_.size() - 1};
}

void Tape::backward(Var loss) {
    if (loss.tape != this) throw std::invalid_argument("backward: loss belongs to another tape");
    const Tensor& lv = nodes_.at(loss.index).value;
    if (lv.rows() != 1 || lv.cols() != 1) {
        throw ShapeError("backward requires a scalar loss, got " + lv.shape_string());
    }
    for (auto& n : nodes_) n.grad = Tensor(n.value.rows(), n.value.cols());
    nodes_[loss.index].grad[0] = 1.0;
    for (std::size_t i = loss.index + 1; i-- > 0;) {
        if (nodes_[i].backprop) nodes_[i].backprop(*this, i);
    }
}

namespace {

Tape& same_tape(Var a, Var b, const char* op) {
    if (a.tape == nullptr || a.tape != b.tape) {
        throw std::invalid_argument(std::string(op) + ": operands live on different tapes");
    }
    return *a.tape;
}

void accumulate(Tape& t, std::size_t target, const Tensor& delta) {
    if (!t.requires_grad(target)) return;
    auto& g = t.grad_mut(target).data();
    const auto& d = delta.data();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += d[i];
}

template <class F>
Var unary_elementwise(Var a, F&& f, Tape::Backprop bp) {
    Tensor out = a.value();
    for (auto& x : out.data()) x = f(x);
    return a.tape->record(std::move(out), {a.index}, std::move(bp));
}

}  // namespace

Var matmul(Var a, Var b) {
    Tape& t = same_tape(a, b, "matmul");
    Tensor out = xmal::matmul(a.value(), b.value());
    const std::size_t ai = a.index, bi = b.index;
    return t.record(std::move(out), {ai, bi}, [ai, bi](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        if (tp.requires_grad(ai)) accumulate(tp, ai, xmal::matmul(g, xmal::transpose(tp.value(bi))));
        if (tp.requires_grad(bi)) accumulate(tp, bi, xmal::matmul(xmal::transpose(tp.value(ai)), g));
    });
}

Var add(Var a, Var b) {
    Tape& t = same_tape(a, b, "add");
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const std::size_t ai = a.index, bi = b.index;
    if (av.same_shape(bv)) {
        Tensor out = av;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
        return t.record(std::move(out), {ai, bi}, [ai, bi](Tape& tp, std::size_t self) {
            accumulate(tp, ai, tp.grad(self));
            accumulate(tp, bi, tp.grad(self));
        });
    }
    if (bv.rows() == 1 && bv.cols() == av.cols()) {
        Tensor out = av;
        for (std::size_t r = 0; r < out.rows(); ++r)
            for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += bv(0, c);
        return t.record(std::move(out), {ai, bi}, [ai, bi](Tape& tp, std::size_t self) {
            const Tensor& g = tp.grad(self);
            accumulate(tp, ai, g);
            if (tp.requires_grad(bi)) {
                Tensor gb(1, g.cols());
                for (std::size_t r = 0; r < g.rows(); ++r)
                    for (std::size_t c = 0; c < g.cols(); ++c) gb(0, c) += g(r, c);
                accumulate(tp, bi, gb);
            }
        });
    }
    throw ShapeError("add: incompatible shapes " + av.shape_string() + " + " + bv.shape_string());
}

Var sub(Var a, Var b) {
    Tape& t = same_tape(a, b, "sub");
    if (!a.value().same_shape(b.value())) {
        throw ShapeError("sub: shapes differ " + a.value().shape_string() + " - " +
                         b.value().shape_string());
    }
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
    const std::size_t ai = a.index, bi = b.index;
    return t.record(std::move(out), {ai, bi}, [ai, bi](Tape& tp, std::size_t self) {
        accumulate(tp, ai, tp.grad(self));
        Tensor neg = tp.grad(self);
        for (auto& x : neg.data()) x = -x;
        accumulate(tp, bi, neg);
    });
}

Var hadamard(Var a, Var b) {
    Tape& t = same_tape(a, b, "hadamard");
    if (!a.value().same_shape(b.value())) {
        throw ShapeError("hadamard: shapes differ " + a.value().shape_string() + " * " +
                         b.value().shape_string());
    }
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
    const std::size_t ai = a.index, bi = b.index;
    return t.record(std::move(out), {ai, bi}, [ai, bi](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        if (tp.requires_grad(ai)) {
            Tensor d = g;
            for (std::size_t i = 0; i < d.size(); ++i) d[i] *= tp.value(bi)[i];
            accumulate(tp, ai, d);
        }
        if (tp.requires_grad(bi)) {
            Tensor d = g;
            for (std::size_t i = 0; i < d.size(); ++i) d[i] *= tp.value(ai)[i];
            accumulate(tp, bi, d);
        }
    });
}

Var scale(Var a, double factor) {
    const std::size_t ai = a.index;
    return unary_elementwise(a, [factor](double x) { return x * factor; },
                             [ai, factor](Tape& tp, std::size_t self) {
                                 Tensor d = tp.grad(self);
                                 for (auto& x : d.data()) x *= factor;
                                 accumulate(tp, ai, d);
                             });
}

Var relu(Var a) {
    const std::size_t ai = a.index;
    return unary_elementwise(a, [](double x) { return x > 0.0 ? x : 0.0; },
                             [ai](Tape& tp, std::size_t self) {
                                 Tensor d = tp.grad(self);
                                 const Tensor& x = tp.value(ai);
                                 for (std::size_t i = 0; i < d.size(); ++i)
                                     if (!(x[i] > 0.0)) d[i] = 0.0;
                                 accumulate(tp, ai, d);
                             });
}

Var sigmoid(Var a) {
    const std::size_t ai = a.index;
    return unary_elementwise(
        a,
        [](double x) {
            if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
            const double e = std::exp(x);
            return e / (1.0 + e);
        },
        [ai](Tape& tp, std::size_t self) {
            Tensor d = tp.grad(self);
            const Tensor& y = tp.value(self);
            for (std::size_t i = 0; i < d.size(); ++i) d[i] *= y[i] * (1.0 - y[i]);
            accumulate(tp, ai, d);
        });
}

Var log(Var a, double floor) {
    const std::size_t ai = a.index;
    return unary_elementwise(a, [floor](double x) { return std::log(std::max(x, floor)); },
                             [ai, floor](Tape& tp, std::size_t self) {
                                 Tensor d = tp.grad(self);
                                 const Tensor& x = tp.value(ai);
                                 for (std::size_t i = 0; i < d.size(); ++i)
                                     d[i] = x[i] > floor ? d[i] / x[i] : 0.0;
                                 accumulate(tp, ai, d);
                             });
}

Var row_l2_normalize(Var a, double eps) {
    const Tensor& x = a.value();
    Tensor out(x.rows(), x.cols());
    std::vector<double> norms(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double ss = 0.0;
        for (double v : x.row(r)) ss += v * v;
        norms[r] = std::sqrt(ss);
        const double denom = norms[r] + eps;
        for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = x(r, c) / denom;
    }
    const std::size_t ai = a.index;
    return a.tape->record(std::move(out), {ai},
                          [ai, eps, norms = std::move(norms)](Tape& tp, std::size_t self) {
                              const Tensor& g = tp.grad(self);
                              const Tensor& xv = tp.value(ai);
                              Tensor d(g.rows(), g.cols());
                              for (std::size_t r = 0; r < g.rows(); ++r) {
                                  const double n = norms[r];
                                  const double denom = n + eps;
                                  double gx = 0.0;
                                  for (std::size_t c = 0; c < g.cols(); ++c) gx += g(r, c) * xv(r, c);
                                  const double radial = n > 0.0 ? gx / (n * denom * denom) : 0.0;
                                  for (std::size_t c = 0; c < g.cols(); ++c)
                                      d(r, c) = g(r, c) / denom - xv(r, c) * radial;
                              }
                              accumulate(tp, ai, d);
                          });
}

namespace {

Tensor softmax_rows(const Tensor& x) {
    Tensor out(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        auto row = x.row(r);
        const double mx = *std::max_element(row.begin(), row.end());
        double z = 0.0;
        for (std::size_t c = 0; c < x.cols(); ++c) {
            out(r, c) = std::exp(x(r, c) - mx);
            z += out(r, c);
        }
        for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) /= z;
    }
    return out;
}

}  // namespace

Var row_softmax(Var a) {
    if (a.cols() == 0) throw ShapeError("row_softmax on zero-width tensor");
    const std::size_t ai = a.index;
    return a.tape->record(softmax_rows(a.value()), {ai}, [ai](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        const Tensor& y = tp.value(self);
        Tensor d(g.rows(), g.cols());
        for (std::size_t r = 0; r < g.rows(); ++r) {
            double dot = 0.0;
            for (std::size_t c = 0; c < g.cols(); ++c) dot += g(r, c) * y(r, c);
            for (std::size_t c = 0; c < g.cols(); ++c) d(r, c) = y(r, c) * (g(r, c) - dot);
        }
        accumulate(tp, ai, d);
    });
}

Var row_log_softmax(Var a) {
    if (a.cols() == 0) throw ShapeError("row_log_softmax on zero-width tensor");
    const Tensor& x = a.value();
    Tensor out(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        auto row = x.row(r);
        const double mx = *std::max_element(row.begin(), row.end());
        double z = 0.0;
        for (double v : row) z += std::exp(v - mx);
        const double lse = mx + std::log(z);
        for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = x(r, c) - lse;
    }
    const std::size_t ai = a.index;
    return a.tape->record(std::move(out), {ai}, [ai](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        const Tensor& y = tp.value(self);
        Tensor d(g.rows(), g.cols());
        for (std::size_t r = 0; r < g.rows(); ++r) {
            double gs = 0.0;
            for (std::size_t c = 0; c < g.cols(); ++c) gs += g(r, c);
            for (std::size_t c = 0; c < g.cols(); ++c) d(r, c) = g(r, c) - std::exp(y(r, c)) * gs;
        }
        accumulate(tp, ai, d);
    });
}

Var sum(Var a) {
    double s = 0.0;
    for (double v : a.value().data()) s += v;
    const std::size_t ai = a.index;
    return a.tape->record(Tensor::scalar(s), {ai}, [ai](Tape& tp, std::size_t self) {
        const Tensor& x = tp.value(ai);
        accumulate(tp, ai, Tensor(x.rows(), x.cols(), tp.grad(self)[0]));
    });
}

Var mean(Var a) {
    const std::size_t n = a.value().size();
    if (n == 0) throw ShapeError("mean of empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var transpose(Var a) {
    const std::size_t ai = a.index;
    return a.tape->record(xmal::transpose(a.value()), {ai}, [ai](Tape& tp, std::size_t self) {
        accumulate(tp, ai, xmal::transpose(tp.grad(self)));
    });
}

Var squared_difference(Var a, Var b) {
    Tape& t = same_tape(a, b, "squared_difference");
    if (!a.value().same_shape(b.value())) {
        throw ShapeError("squared_difference: shapes differ " + a.value().shape_string() + " vs " +
                         b.value().shape_string());
    }
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double d = out[i] - b.value()[i];
        out[i] = d * d;
    }
    const std::size_t ai = a.index, bi = b.index;
    return t.record(std::move(out), {ai, bi}, [ai, bi](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        Tensor d = g;
        for (std::size_t i = 0; i < d.size(); ++i)
            d[i] *= 2.0 * (tp.value(ai)[i] - tp.value(bi)[i]);
        accumulate(tp, ai, d);
        for (auto& x : d.data()) x = -x;
        accumulate(tp, bi, d);
    });
}

}  // namespace xmal::ad
