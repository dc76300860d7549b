#include "kgfuse/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kgfuse {

Tape::Var Tape::push(Tensor value, std::function<void(Tape&)> back, Param* bound) {
    Node node;
    node.grad = Tensor::zeros(value.shape());
    node.value = std::move(value);
    node.back = std::move(back);
    node.bound = bound;
    nodes_.push_back(std::move(node));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Tape::Var Tape::constant(Tensor value) { return push(std::move(value)); }

Tape::Var Tape::param(Param& p) { return push(p.value, {}, &p); }

double Tape::scalar(Var v) const {
    const Tensor& t = val(v);
    if (t.size() != 1) {
        throw DimensionError("expected a scalar, got " + shape_str(t.shape()));
    }
    return t.flat(0);
}

void Tape::backward(Var root, double seed) {
    if (!root.valid() || root.id >= static_cast<int>(nodes_.size())) {
        throw ValidationError("backward: invalid root");
    }
    if (nodes_[static_cast<std::size_t>(root.id)].value.size() != 1) {
        throw DimensionError("backward root must be a scalar");
    }
    nodes_[static_cast<std::size_t>(root.id)].grad.flat(0) += seed;
    for (int i = root.id; i >= 0; --i) {
        Node& node = nodes_[static_cast<std::size_t>(i)];
        if (node.back) {
            node.back(*this);
        } else if (node.bound) {
            Param& p = *node.bound;
            for (std::int64_t k = 0; k < node.grad.size(); ++k) {
                p.grad.flat(k) += node.grad.flat(k);
            }
        }
    }
}

Tape::Var Tape::matmul(Var a, Var b) {
    Tensor out = kgfuse::matmul(val(a), val(b));
    return push(std::move(out), [a, b, self = Var{static_cast<int>(nodes_.size())}](Tape& t) {
        const Tensor& dc = t.grad_mut(self);
        const Tensor& av = t.val(a);
        const Tensor& bv = t.val(b);
        Tensor& da = t.grad_mut(a);
        Tensor& db = t.grad_mut(b);
        const int m = av.rows(), k = av.cols(), n = bv.cols();
        // dA += dC * B^T
        for (int i = 0; i < m; ++i) {
            for (int p = 0; p < k; ++p) {
                double acc = 0.0;
                for (int j = 0; j < n; ++j) acc += dc.at(i, j) * bv.at(p, j);
                da.at(i, p) += acc;
            }
        }
        // dB += A^T * dC
        for (int p = 0; p < k; ++p) {
            for (int j = 0; j < n; ++j) {
                double acc = 0.0;
                for (int i = 0; i < m; ++i) acc += av.at(i, p) * dc.at(i, j);
                db.at(p, j) += acc;
            }
        }
    });
}

Tape::Var Tape::matvec(Var m, Var v) {
    const Tensor& mv = val(m);
    const Tensor& vv = val(v);
    if (mv.rank() != 2 || vv.rank() != 1 || mv.cols() != static_cast<int>(vv.size())) {
        throw DimensionError("matvec shape mismatch: " + shape_str(mv.shape()) + " x " +
                             shape_str(vv.shape()));
    }
    Tensor out({mv.rows()});
    for (int i = 0; i < mv.rows(); ++i) {
        double acc = 0.0;
        for (int j = 0; j < mv.cols(); ++j) acc += mv.at(i, j) * vv.flat(j);
        out.flat(i) = acc;
    }
    return push(std::move(out), [m, v, self = Var{static_cast<int>(nodes_.size())}](Tape& t) {
        const Tensor& dy = t.grad_mut(self);
        const Tensor& mv = t.val(m);
        const Tensor& vv = t.val(v);
        Tensor& dm = t.grad_mut(m);
        Tensor& dv = t.grad_mut(v);
        for (int i = 0; i < mv.rows(); ++i) {
            const double g = dy.flat(i);
            if (g == 0.0) continue;
            for (int j = 0; j < mv.cols(); ++j) {
                dm.at(i, j) += g * vv.flat(j);
                dv.flat(j) += g * mv.at(i, j);
            }
        }
    });
}

Tape::Var Tape::transpose(Var a) {
    const Tensor& av = val(a);
    if (av.rank() != 2) throw DimensionError("transpose expects a matrix");
    Tensor out({av.cols(), av.rows()});
    for (int i = 0; i < av.rows(); ++i) {
        for (int j = 0; j < av.cols(); ++j) out.at(j, i) = av.at(i, j);
    }
    return push(std::move(out), [a, self = Var{static_cast<int>(nodes_.size())}](Tape& t) {
        const Tensor& dout = t.grad_mut(self);
        Tensor& da = t.grad_mut(a);
        for (int i = 0; i < dout.rows(); ++i) {
            for (int j = 0; j < dout.cols(); ++j) da.at(j, i) += dout.at(i, j);
        }
    });
}

Tape::Var Tape::add(Var a, Var b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    if (!av.same_shape(bv)) {
        throw DimensionError("add shape mismatch: " + shape_str(av.shape()) + " vs " +
                             shape_str(bv.shape()));
    }
    Tensor out(av.shape());
    for (std::int64_t i = 0; i < av.size(); ++i) out.flat(i) = av.flat(i) + bv.flat(i);
    return push(std::move(out), [a, b, self = Var{static_cast<int>(nodes_.size())}](Tape& t) {
        const Tensor& dout = t.grad_mut(self);
        Tensor& da = t.grad_mut(a);
        Tensor& db = t.grad_mut(b);
        for (std::int64_t i = 0; i < dout.size(); ++i) {
            da.flat(i) += dout.flat(i);
            db.flat(i) += dout.flat(i);
        }
    });
}

Tape::Var Tape::add_row_broadcast(Var m, Var row) {
    const Tensor& mv = val(m);
    const Tensor& rv = val(row);
    if (mv.rank() != 2 || rv.rank() != 1 || mv.cols() != static_cast<int>(rv.size())) {
        throw DimensionError("add_row_broadcast shape mismatch: " + shape_str(mv.shape()) +
                             " vs " + shape_str(rv.shape()));
    }
    Tensor out(mv.shape());
    for (int i = 0; i < mv.rows(); ++i) {
        for (int j = 0; j < mv.cols(); ++j) out.at(i, j) = mv.at(i, j) + rv.flat(j);
    }
    return push(std::move(out), [m, row, self = Var{static_cast<int>(nodes_.size())}](Tape& t) {
        const Tensor& dout = t.grad_mut(self);
        Tensor& dm = t.grad_mut(m);
        Tensor& dr = t.grad_mut(row);
        for (int i = 0; i < dout.rows(); ++i) {
            for (int j = 0; j < dout.cols(); ++j) {
                dm.at(i, j) += dout.at(i, j);
                dr.flat(j) += dout.at(i, j);
            }
        }
    });
}

Tape::Var Tape::mul(Var a, Var b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    if (!av.same_shape(bv)) {
        throw DimensionError("mul shape mismatch: " + shape_str(av.shape()) + " vs " +
                             shape_str(bv.shape()));
    }
    Tensor out(av.shape());
    for (std::int64_t i = 0; i < av.size(); ++i) out.flat(i) = av.flat(i) * bv.flat(i);
    return push(std::move(out), [a, b, self = Var{static_cast<int>(nodes_.size())}](Tape& t) {
        const Tensor& dout = t.grad_mut(self);
        const Tensor& av = t.val(a);
        const Tensor& bv = t.val(b);
        Tensor& da = t.grad_mut(a);
        Tensor& db = t.grad_mut(b);
        for (std::int64_t i = 0; i < dout.size(); ++i) {
            da.flat(i) += dout.flat(i) * bv.flat(i);
            db.flat(i) += dout.flat(i) * av.flat(i);
        }
    });
}

Tape::Var Tape::scale(Var a, double s) {
    const Tensor& av = val(a);
    Tensor out(av.shape());
    for (std::int64_t i = 0; i < av.size(); ++i) out.flat(i) = av.flat(i) * s;
    return push(std::move(out), [a, s, self = Var{static_cast<int>(nodes_.size())}](Tape& t) {
        const Tensor& dout = t.grad_mut(self);
        Tensor& da = t.grad_mut(a);
        for (std::int64_t i = 0; i < dout.size(); ++i) da.flat(i) += s * dout.flat(i);
    });
}

Tape::Var Tape::relu(Var a) {
    const Tensor& av = val(a);
    Tensor out(av.shape());
    for (std::int64_t i = 0; i < av.size(); ++i) out.flat(i) = av.flat(i) > 0.0 ? av.flat(i) : 0.0;
    return push(std::move(out), [a, self = Var{static_cast<int>(nodes_.size())}](Tape& t) {
        const Tensor& dout = t.grad_mut(self);
        const Tensor& av = t.val(a);
        Tensor& da = t.grad_mut(a);
        for (std::int64_t i = 0; i < dout.size(); ++i) {
            if (av.flat(i) > 0.0) da.flat(i) += dout.flat(i);
        }
    });
}

Tape::Var Tape::leaky_relu(Var a, double slope) {
    if (!(slope > 0.0 && slope < 1.0)) {
        throw ValidationError("leaky_relu slope must lie in (0, 1), got " + std::to_string(slope));
    }
    const Tensor& av = val(a);
    if (!av.all_finite()) {
        throw NumericError("leaky_relu: non-finite input");
    }
    Tensor out(av.shape());
    for (std::int64_t i = 0; i < av.size(); ++i) {
        const double x = av.flat(i);
        out.flat(i) = x > 0.0 ? x : slope * x;
    }
    return push(std::move(out), [a, slope, self = Var{static_cast<int>(nodes_.size())}](Tape& t) {
        const Tensor& dout = t.grad_mut(self);
        const Tensor& av = t.val(a);
        Tensor& da = t.grad_mut(a);
        for (std::int64_t i = 0; i < dout.size(); ++i) {
            // x == 0 uses the negative-side slope as subgradient
            da.flat(i) += (av.flat(i) > 0.0 ? 1.0 : slope) * dout.flat(i);
        }
    });
}

Tape::Var Tape::slice1d(Var a, int from, int to) {
    const Tensor& av = val(a);
    if (av.rank() != 1 || from < 0 || to > static_cast<int>(av.size()) || from >= to) {
        throw DimensionError("slice1d [" + std::to_string(from) + ", " + std::to_string(to) +
                             ") invalid for " + shape_str(av.shape()));
    }
    Tensor out({to - from});
    for (int i = from; i < to; ++i) out.flat(i - from) = av.flat(i);
    return push(std::move(out), [a, from, self = Var{static_cast<int>(nodes_.size())}](Tape& t) {
        const Tensor& dout = t.grad_mut(self);
        Tensor& da = t.grad_mut(a);
        for (std::int64_t i = 0; i < dout.size(); ++i) da.flat(from + i) += dout.flat(i);
    });
}

Tape::Var Tape::concat_vecs(std::span<const Var> parts) {
    if (parts.empty()) throw DimensionError("concat_vecs on empty list");
    int total = 0;
    for (Var p : parts) {
        if (val(p).rank() != 1) {
            throw DimensionError("concat_vecs expects vectors, got " + shape_str(val(p).shape()));
        }
        total += static_cast<int>(val(p).size());
    }
    Tensor out({total});
    int pos = 0;
    for (Var p : parts) {
        const Tensor& pv = val(p);
        for (std::int64_t i = 0; i < pv.size(); ++i) out.flat(pos++) = pv.flat(i);
    }
    std::vector<Var> owned(parts.begin(), parts.end());
    return push(std::move(out),
                [owned = std::move(owned), self = Var{static_cast<int>(nodes_.size())}](Tape& t) {
                    const Tensor& dout = t.grad_mut(self);
                    std::int64_t pos = 0;
                    for (Var p : owned) {
                        Tensor& dp = t.grad_mut(p);
                        for (std::int64_t i = 0; i < dp.size(); ++i) dp.flat(i) += dout.flat(pos++);
                    }
                });
}

Tape::Var Tape::concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw DimensionError("concat_cols on empty list");
    const int rows = val(parts[0]).rows();
    int total_cols = 0;
    for (Var p : parts) {
        if (val(p).rows() != rows) {
            throw DimensionError("concat_cols row mismatch: " + shape_str(val(p).shape()));
        }
        total_cols += val(p).cols();
    }
    Tensor out({rows, total_cols});
    int col = 0;
    for (Var p : parts) {
        const Tensor& pv = val(p);
        for (int i = 0; i < rows; ++i) {
            for (int j = 0; j < pv.cols(); ++j) out.at(i, col + j) = pv.at(i, j);
        }
        col += pv.cols();
    }
    std::vector<Var> owned(parts.begin(), parts.end());
    return push(std::move(out),
                [owned = std::move(owned), self = Var{static_cast<int>(nodes_.size())}](Tape& t) {
                    const Tensor& dout = t.grad_mut(self);
                    int col = 0;
                    for (Var p : owned) {
                        Tensor& dp = t.grad_mut(p);
                        for (int i = 0; i < dp.rows(); ++i) {
                            for (int j = 0; j < dp.cols(); ++j) dp.at(i, j) += dout.at(i, col + j);
                        }
                        col += dp.cols();
                    }
                });
}

Tape::Var Tape::concat_rows(std::span<const Var> parts) {
    if (parts.empty()) throw DimensionError("concat_rows on empty list");
    const int cols = val(parts[0]).cols();
    int total_rows = 0;
    for (Var p : parts) {
        if (val(p).cols() != cols) {
            throw DimensionError("concat_rows column mismatch: " + shape_str(val(p).shape()));
        }
        total_rows += val(p).rows();
    }
    Tensor out({total_rows, cols});
    int row = 0;
    for (Var p : parts) {
        const Tensor& pv = val(p);
        for (int i = 0; i < pv.rows(); ++i) {
            for (int j = 0; j < cols; ++j) out.at(row + i, j) = pv.at(i, j);
        }
        row += pv.rows();
    }
    std::vector<Var> owned(parts.begin(), parts.end());
    return push(std::move(out),
                [owned = std::move(owned), self = Var{static_cast<int>(nodes_.size())}](Tape& t) {
                    const Tensor& dout = t.grad_mut(self);
                    int row = 0;
                    for (Var p : owned) {
                        Tensor& dp = t.grad_mut(p);
                        for (int i = 0; i < dp.rows(); ++i) {
                            for (int j = 0; j < dp.cols(); ++j) dp.at(i, j) += dout.at(row + i, j);
                        }
                        row += dp.rows();
                    }
                });
}

Tape::Var Tape::global_concat(Var m, const std::array<int, 4>& globals) {
    const Tensor& mv = val(m);
    if (mv.rank() != 2) throw DimensionError("global_concat expects a matrix");
    const int rows = mv.rows(), d = mv.cols();
    for (int g : globals) {
        if (g < 0 || g >= rows) {
            throw ValidationError("global_concat: global index " + std::to_string(g) +
                                  " out of range");
        }
    }
    Tensor out({rows, 5 * d});
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < d; ++j) out.at(i, j) = mv.at(i, j);
        for (int b = 0; b < 4; ++b) {
            const int g = globals[static_cast<std::size_t>(b)];
            for (int j = 0; j < d; ++j) out.at(i, (b + 1) * d + j) = mv.at(g, j);
        }
    }
    return push(std::move(out),
                [m, globals, self = Var{static_cast<int>(nodes_.size())}](Tape& t) {
                    const Tensor& dout = t.grad_mut(self);
                    Tensor& dm = t.grad_mut(m);
                    const int rows = dm.rows(), d = dm.cols();
                    for (int i = 0; i < rows; ++i) {
                        for (int j = 0; j < d; ++j) dm.at(i, j) += dout.at(i, j);
                        for (int b = 0; b < 4; ++b) {
                            const int g = globals[static_cast<std::size_t>(b)];
                            for (int j = 0; j < d; ++j) {
                                dm.at(g, j) += dout.at(i, (b + 1) * d + j);
                            }
                        }
                    }
                });
}

Tape::Var Tape::outer_sum(Var rows, Var cols) {
    const Tensor& rv = val(rows);
    const Tensor& cv = val(cols);
    if (rv.rank() != 1 || cv.rank() != 1) throw DimensionError("outer_sum expects vectors");
    const int m = static_cast<int>(rv.size()), n = static_cast<int>(cv.size());
    Tensor out({m, n});
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) out.at(i, j) = rv.flat(i) + cv.flat(j);
    }
    return push(std::move(out),
                [rows, cols, self = Var{static_cast<int>(nodes_.size())}](Tape& t) {
                    const Tensor& dout = t.grad_mut(self);
                    Tensor& dr = t.grad_mut(rows);
                    Tensor& dc = t.grad_mut(cols);
                    for (int i = 0; i < dout.rows(); ++i) {
                        for (int j = 0; j < dout.cols(); ++j) {
                            dr.flat(i) += dout.at(i, j);
                            dc.flat(j) += dout.at(i, j);
                        }
                    }
                });
}

Tape::Var Tape::row_softmax(Var logits, Tensor factors) {
    const Tensor& lv = val(logits);
    if (lv.rank() != 2 || !lv.same_shape(factors)) {
        throw DimensionError("row_softmax: logits " + shape_str(lv.shape()) +
                             " vs factors " + shape_str(factors.shape()));
    }
    for (std::int64_t i = 0; i < factors.size(); ++i) {
        if (!(factors.flat(i) > 0.0)) {
            throw ValidationError("row_softmax factors must be positive");
        }
    }
    const int m = lv.rows(), n = lv.cols();
    Tensor out({m, n});
    for (int i = 0; i < m; ++i) {
        double shift = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < n; ++j) shift = std::max(shift, lv.at(i, j));
        double denom = 0.0;
        for (int j = 0; j < n; ++j) {
            out.at(i, j) = factors.at(i, j) * std::exp(lv.at(i, j) - shift);
            denom += out.at(i, j);
        }
        for (int j = 0; j < n; ++j) out.at(i, j) /= denom;
    }
    return push(std::move(out),
                [logits, self = Var{static_cast<int>(nodes_.size())}](Tape& t) {
                    const Tensor& dout = t.grad_mut(self);
                    const Tensor& g = t.val(self); // the attention rows themselves
                    Tensor& dl = t.grad_mut(logits);
                    for (int i = 0; i < dout.rows(); ++i) {
                        double dot = 0.0;
                        for (int j = 0; j < dout.cols(); ++j) dot += dout.at(i, j) * g.at(i, j);
                        for (int j = 0; j < dout.cols(); ++j) {
                            dl.at(i, j) += g.at(i, j) * (dout.at(i, j) - dot);
                        }
                    }
                });
}

Tape::Var Tape::mean_rows(Var m) {
    const Tensor& mv = val(m);
    if (mv.rank() != 2) throw DimensionError("mean_rows expects a matrix");
    const int rows = mv.rows(), cols = mv.cols();
    Tensor out({cols});
    for (int j = 0; j < cols; ++j) {
        double acc = 0.0;
        for (int i = 0; i < rows; ++i) acc += mv.at(i, j);
        out.flat(j) = acc / rows;
    }
    return push(std::move(out), [m, self = Var{static_cast<int>(nodes_.size())}](Tape& t) {
        const Tensor& dout = t.grad_mut(self);
        Tensor& dm = t.grad_mut(m);
        const double inv = 1.0 / dm.rows();
        for (int i = 0; i < dm.rows(); ++i) {
            for (int j = 0; j < dm.cols(); ++j) dm.at(i, j) += dout.flat(j) * inv;
        }
    });
}

Tape::Var Tape::sum(Var a) {
    const Tensor& av = val(a);
    double acc = 0.0;
    for (std::int64_t i = 0; i < av.size(); ++i) acc += av.flat(i);
    return push(Tensor::scalar(acc), [a, self = Var{static_cast<int>(nodes_.size())}](Tape& t) {
        const double g = t.grad_mut(self).flat(0);
        Tensor& da = t.grad_mut(a);
        for (std::int64_t i = 0; i < da.size(); ++i) da.flat(i) += g;
    });
}

Tape::Var Tape::softmax(Var logits, const std::vector<bool>* mask) {
    Tensor out = kgfuse::softmax(val(logits), mask);
    std::vector<bool> mask_copy = mask ? *mask : std::vector<bool>();
    return push(std::move(out),
                [logits, mask_copy = std::move(mask_copy),
                 self = Var{static_cast<int>(nodes_.size())}](Tape& t) {
                    const Tensor& dout = t.grad_mut(self);
                    const Tensor& p = t.val(self);
                    Tensor& dl = t.grad_mut(logits);
                    double dot = 0.0;
                    for (std::int64_t j = 0; j < p.size(); ++j) dot += dout.flat(j) * p.flat(j);
                    for (std::int64_t j = 0; j < p.size(); ++j) {
                        if (!mask_copy.empty() && !mask_copy[static_cast<std::size_t>(j)]) continue;
                        dl.flat(j) += p.flat(j) * (dout.flat(j) - dot);
                    }
                });
}

Tape::Var Tape::cross_entropy(Var probs, int label) {
    double loss = kgfuse::cross_entropy(val(probs), label);
    return push(Tensor::scalar(loss),
                [probs, label, self = Var{static_cast<int>(nodes_.size())}](Tape& t) {
                    const double g = t.grad_mut(self).flat(0);
                    const double p = t.val(probs).flat(label);
                    if (p > 1e-12) {
                        t.grad_mut(probs).flat(label) += g * (-1.0 / p);
                    }
                });
}

} // namespace kgfuse
