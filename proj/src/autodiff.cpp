#include "hoi/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_set>

namespace hoi {

void Node::accumulate(const Tensor& g) {
    if (!requires_grad) return;
    if (grad.size() == 0) grad = Tensor(value.shape());
    if (!grad.same_shape(g)) throw ShapeError("gradient shape mismatch");
    double* dst = grad.data();
    const double* src = g.data();
    for (int i = 0; i < g.size(); ++i) dst[i] += src[i];
}

namespace {

Var make_node(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    for (const auto& p : n->parents) {
        if (p->requires_grad) {
            n->requires_grad = true;
            break;
        }
    }
    if (n->requires_grad) n->backprop = std::move(backprop);
    return n;
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
    if (!a->value.same_shape(b->value))
        throw ShapeError(std::string(op) + ": " + a->value.shape_str() + " vs " + b->value.shape_str());
}

}  // namespace

Var constant(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    return n;
}

Var parameter(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = true;
    return n;
}

Var add(const Var& a, const Var& b) {
    require_same_shape(a, b, "add");
    Tensor out = a->value;
    for (int i = 0; i < out.size(); ++i) out.flat(i) += b->value.flat(i);
    return make_node(std::move(out), {a, b}, [](Node& n) {
        n.parents[0]->accumulate(n.grad);
        n.parents[1]->accumulate(n.grad);
    });
}

Var sub(const Var& a, const Var& b) {
    require_same_shape(a, b, "sub");
    Tensor out = a->value;
    for (int i = 0; i < out.size(); ++i) out.flat(i) -= b->value.flat(i);
    return make_node(std::move(out), {a, b}, [](Node& n) {
        n.parents[0]->accumulate(n.grad);
        Tensor neg = n.grad;
        for (int i = 0; i < neg.size(); ++i) neg.flat(i) = -neg.flat(i);
        n.parents[1]->accumulate(neg);
    });
}

Var mul(const Var& a, const Var& b) {
    require_same_shape(a, b, "mul");
    Tensor out = a->value;
    for (int i = 0; i < out.size(); ++i) out.flat(i) *= b->value.flat(i);
    return make_node(std::move(out), {a, b}, [](Node& n) {
        Tensor da = n.grad;
        Tensor db = n.grad;
        const Tensor& av = n.parents[0]->value;
        const Tensor& bv = n.parents[1]->value;
        for (int i = 0; i < n.grad.size(); ++i) {
            da.flat(i) *= bv.flat(i);
            db.flat(i) *= av.flat(i);
        }
        n.parents[0]->accumulate(da);
        n.parents[1]->accumulate(db);
    });
}

Var scale(const Var& a, double s) {
    Tensor out = a->value;
    for (int i = 0; i < out.size(); ++i) out.flat(i) *= s;
    return make_node(std::move(out), {a}, [s](Node& n) {
        Tensor da = n.grad;
        for (int i = 0; i < da.size(); ++i) da.flat(i) *= s;
        n.parents[0]->accumulate(da);
    });
}

Var matmul(const Var& a, const Var& b) {
    const Tensor& av = a->value;
    const Tensor& bv = b->value;
    if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.rows())
        throw ShapeError("matmul: " + av.shape_str() + " x " + bv.shape_str());
    const int m = av.rows(), k = av.cols(), n = bv.cols();
    Tensor out({m, n});
    for (int i = 0; i < m; ++i) {
        double* orow = out.data() + static_cast<size_t>(i) * n;
        const double* arow = av.data() + static_cast<size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const double aval = arow[p];
            if (aval == 0.0) continue;
            const double* brow = bv.data() + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) orow[j] += aval * brow[j];
        }
    }
    return make_node(std::move(out), {a, b}, [m, k, n](Node& node) {
        const Tensor& g = node.grad;
        const Tensor& av = node.parents[0]->value;
        const Tensor& bv = node.parents[1]->value;
        // dA = G * B^T
        Tensor da({m, k});
        for (int i = 0; i < m; ++i) {
            const double* grow = g.data() + static_cast<size_t>(i) * n;
            double* drow = da.data() + static_cast<size_t>(i) * k;
            for (int p = 0; p < k; ++p) {
                const double* brow = bv.data() + static_cast<size_t>(p) * n;
                double acc = 0.0;
                for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
                drow[p] = acc;
            }
        }
        // dB = A^T * G
        Tensor db({k, n});
        for (int i = 0; i < m; ++i) {
            const double* arow = av.data() + static_cast<size_t>(i) * k;
            const double* grow = g.data() + static_cast<size_t>(i) * n;
            for (int p = 0; p < k; ++p) {
                const double aval = arow[p];
                if (aval == 0.0) continue;
                double* drow = db.data() + static_cast<size_t>(p) * n;
                for (int j = 0; j < n; ++j) drow[j] += aval * grow[j];
            }
        }
        node.parents[0]->accumulate(da);
        node.parents[1]->accumulate(db);
    });
}

Var transpose(const Var& a) {
    const Tensor& av = a->value;
    if (av.rank() != 2) throw ShapeError("transpose expects rank-2");
    Tensor out({av.cols(), av.rows()});
    for (int r = 0; r < av.rows(); ++r)
        for (int c = 0; c < av.cols(); ++c) out.at(c, r) = av.at(r, c);
    return make_node(std::move(out), {a}, [](Node& n) {
        const Tensor& g = n.grad;
        Tensor da(n.parents[0]->value.shape());
        for (int r = 0; r < g.rows(); ++r)
            for (int c = 0; c < g.cols(); ++c) da.at(c, r) = g.at(r, c);
        n.parents[0]->accumulate(da);
    });
}

Var add_row(const Var& m, const Var& row) {
    const Tensor& mv = m->value;
    const Tensor& rv = row->value;
    if (mv.rank() != 2 || rv.rank() != 2 || rv.rows() != 1 || rv.cols() != mv.cols())
        throw ShapeError("add_row: " + mv.shape_str() + " + " + rv.shape_str());
    Tensor out = mv;
    for (int r = 0; r < mv.rows(); ++r)
        for (int c = 0; c < mv.cols(); ++c) out.at(r, c) += rv.at(0, c);
    return make_node(std::move(out), {m, row}, [](Node& n) {
        n.parents[0]->accumulate(n.grad);
        Tensor drow({1, n.grad.cols()});
        for (int r = 0; r < n.grad.rows(); ++r)
            for (int c = 0; c < n.grad.cols(); ++c) drow.at(0, c) += n.grad.at(r, c);
        n.parents[1]->accumulate(drow);
    });
}

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols of nothing");
    const int rows = parts[0]->value.rows();
    int total = 0;
    for (const auto& p : parts) {
        if (p->value.rank() != 2 || p->value.rows() != rows)
            throw ShapeError("concat_cols: row mismatch");
        total += p->value.cols();
    }
    Tensor out({rows, total});
    int off = 0;
    for (const auto& p : parts) {
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < p->value.cols(); ++c) out.at(r, off + c) = p->value.at(r, c);
        off += p->value.cols();
    }
    std::vector<Var> parents(parts.begin(), parts.end());
    return make_node(std::move(out), std::move(parents), [](Node& n) {
        int off = 0;
        for (auto& p : n.parents) {
            const int pc = p->value.cols();
            Tensor dp(p->value.shape());
            for (int r = 0; r < n.grad.rows(); ++r)
                for (int c = 0; c < pc; ++c) dp.at(r, c) = n.grad.at(r, off + c);
            p->accumulate(dp);
            off += pc;
        }
    });
}

Var stack_rows(const std::vector<Var>& rows) {
    if (rows.empty()) throw ShapeError("stack_rows of nothing");
    const int d = rows[0]->value.cols();
    for (const auto& r : rows)
        if (r->value.rank() != 2 || r->value.rows() != 1 || r->value.cols() != d)
            throw ShapeError("stack_rows: all inputs must be 1x" + std::to_string(d));
    Tensor out({static_cast<int>(rows.size()), d});
    for (size_t i = 0; i < rows.size(); ++i)
        for (int c = 0; c < d; ++c) out.at(static_cast<int>(i), c) = rows[i]->value.at(0, c);
    std::vector<Var> parents(rows.begin(), rows.end());
    return make_node(std::move(out), std::move(parents), [](Node& n) {
        for (size_t i = 0; i < n.parents.size(); ++i) {
            Tensor dp({1, n.grad.cols()});
            for (int c = 0; c < n.grad.cols(); ++c) dp.at(0, c) = n.grad.at(static_cast<int>(i), c);
            n.parents[i]->accumulate(dp);
        }
    });
}

Var slice_cols(const Var& a, int begin, int count) {
    const Tensor& av = a->value;
    if (av.rank() != 2 || begin < 0 || count <= 0 || begin + count > av.cols())
        throw ShapeError("slice_cols out of range");
    Tensor out({av.rows(), count});
    for (int r = 0; r < av.rows(); ++r)
        for (int c = 0; c < count; ++c) out.at(r, c) = av.at(r, begin + c);
    return make_node(std::move(out), {a}, [begin, count](Node& n) {
        Tensor da(n.parents[0]->value.shape());
        for (int r = 0; r < n.grad.rows(); ++r)
            for (int c = 0; c < count; ++c) da.at(r, begin + c) = n.grad.at(r, c);
        n.parents[0]->accumulate(da);
    });
}

Var gather_cols(const Var& a, const std::vector<int>& cols) {
    const Tensor& av = a->value;
    if (av.rank() != 2 || cols.empty()) throw ShapeError("gather_cols: rank-2 input, non-empty index set");
    for (int c : cols)
        if (c < 0 || c >= av.cols()) throw ShapeError("gather_cols index out of range");
    Tensor out({av.rows(), static_cast<int>(cols.size())});
    for (int r = 0; r < av.rows(); ++r)
        for (size_t i = 0; i < cols.size(); ++i)
            out.at(r, static_cast<int>(i)) = av.at(r, cols[i]);
    return make_node(std::move(out), {a}, [cols](Node& n) {
        Tensor da(n.parents[0]->value.shape());
        for (int r = 0; r < n.grad.rows(); ++r)
            for (size_t i = 0; i < cols.size(); ++i)
                da.at(r, cols[i]) += n.grad.at(r, static_cast<int>(i));
        n.parents[0]->accumulate(da);
    });
}

Var row_at(const Var& a, int r) {
    const Tensor& av = a->value;
    if (av.rank() != 2 || r < 0 || r >= av.rows()) throw ShapeError("row_at out of range");
    Tensor out({1, av.cols()});
    for (int c = 0; c < av.cols(); ++c) out.at(0, c) = av.at(r, c);
    return make_node(std::move(out), {a}, [r](Node& n) {
        Tensor da(n.parents[0]->value.shape());
        for (int c = 0; c < n.grad.cols(); ++c) da.at(r, c) = n.grad.at(0, c);
        n.parents[0]->accumulate(da);
    });
}

Var softmax_rows(const Var& a) {
    const Tensor& av = a->value;
    if (av.rank() != 2) throw ShapeError("softmax_rows expects rank-2");
    Tensor out = av;
    for (int r = 0; r < av.rows(); ++r) {
        double mx = out.at(r, 0);
        for (int c = 1; c < av.cols(); ++c) mx = std::max(mx, out.at(r, c));
        double sum = 0.0;
        for (int c = 0; c < av.cols(); ++c) {
            double e = std::exp(out.at(r, c) - mx);
            out.at(r, c) = e;
            sum += e;
        }
        for (int c = 0; c < av.cols(); ++c) out.at(r, c) /= sum;
    }
    return make_node(std::move(out), {a}, [](Node& n) {
        const Tensor& p = n.value;
        Tensor da(p.shape());
        for (int r = 0; r < p.rows(); ++r) {
            double dot = 0.0;
            for (int c = 0; c < p.cols(); ++c) dot += n.grad.at(r, c) * p.at(r, c);
            for (int c = 0; c < p.cols(); ++c)
                da.at(r, c) = p.at(r, c) * (n.grad.at(r, c) - dot);
        }
        n.parents[0]->accumulate(da);
    });
}

Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps) {
    const Tensor& xv = x->value;
    const int d = xv.cols();
    if (gamma->value.cols() != d || beta->value.cols() != d || gamma->value.rows() != 1 ||
        beta->value.rows() != 1)
        throw ShapeError("layer_norm_rows: gamma/beta must be 1x" + std::to_string(d));
    Tensor out(xv.shape());
    Tensor xhat(xv.shape());
    std::vector<double> inv_std(static_cast<size_t>(xv.rows()));
    for (int r = 0; r < xv.rows(); ++r) {
        double mean = 0.0;
        for (int c = 0; c < d; ++c) mean += xv.at(r, c);
        mean /= d;
        double var = 0.0;
        for (int c = 0; c < d; ++c) {
            double dvc = xv.at(r, c) - mean;
            var += dvc * dvc;
        }
        var /= d;
        double istd = 1.0 / std::sqrt(var + eps);
        inv_std[static_cast<size_t>(r)] = istd;
        for (int c = 0; c < d; ++c) {
            double h = (xv.at(r, c) - mean) * istd;
            xhat.at(r, c) = h;
            out.at(r, c) = h * gamma->value.at(0, c) + beta->value.at(0, c);
        }
    }
    return make_node(std::move(out), {x, gamma, beta},
                     [xhat = std::move(xhat), inv_std = std::move(inv_std), d](Node& n) {
                         const Tensor& g = n.grad;
                         const Tensor& gam = n.parents[1]->value;
                         Tensor dx(n.parents[0]->value.shape());
                         Tensor dgamma({1, d});
                         Tensor dbeta({1, d});
                         for (int r = 0; r < g.rows(); ++r) {
                             double mean_dy = 0.0, mean_dyx = 0.0;
                             for (int c = 0; c < d; ++c) {
                                 double dy = g.at(r, c) * gam.at(0, c);
                                 mean_dy += dy;
                                 mean_dyx += dy * xhat.at(r, c);
                                 dgamma.at(0, c) += g.at(r, c) * xhat.at(r, c);
                                 dbeta.at(0, c) += g.at(r, c);
                             }
                             mean_dy /= d;
                             mean_dyx /= d;
                             for (int c = 0; c < d; ++c) {
                                 double dy = g.at(r, c) * gam.at(0, c);
                                 dx.at(r, c) = inv_std[static_cast<size_t>(r)] *
                                               (dy - mean_dy - xhat.at(r, c) * mean_dyx);
                             }
                         }
                         n.parents[0]->accumulate(dx);
                         n.parents[1]->accumulate(dgamma);
                         n.parents[2]->accumulate(dbeta);
                     });
}

Var gelu(const Var& a) {
    Tensor out = a->value;
    for (int i = 0; i < out.size(); ++i) {
        double v = out.flat(i);
        out.flat(i) = 0.5 * v * (1.0 + std::erf(v * (1.0 / std::numbers::sqrt2)));
    }
    return make_node(std::move(out), {a}, [](Node& n) {
        const Tensor& x = n.parents[0]->value;
        Tensor da = n.grad;
        for (int i = 0; i < da.size(); ++i) {
            double v = x.flat(i);
            double cdf = 0.5 * (1.0 + std::erf(v * (1.0 / std::numbers::sqrt2)));
            double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi);
            da.flat(i) *= cdf + v * pdf;
        }
        n.parents[0]->accumulate(da);
    });
}

Var sigmoid(const Var& a) {
    Tensor out = a->value;
    for (int i = 0; i < out.size(); ++i) out.flat(i) = 1.0 / (1.0 + std::exp(-out.flat(i)));
    return make_node(std::move(out), {a}, [](Node& n) {
        Tensor da = n.grad;
        for (int i = 0; i < da.size(); ++i) {
            double s = n.value.flat(i);
            da.flat(i) *= s * (1.0 - s);
        }
        n.parents[0]->accumulate(da);
    });
}

Var log_of(const Var& a) {
    Tensor out = a->value;
    for (int i = 0; i < out.size(); ++i) out.flat(i) = std::log(out.flat(i));
    return make_node(std::move(out), {a}, [](Node& n) {
        Tensor da = n.grad;
        const Tensor& x = n.parents[0]->value;
        for (int i = 0; i < da.size(); ++i) da.flat(i) /= x.flat(i);
        n.parents[0]->accumulate(da);
    });
}

Var pow_of(const Var& a, double exponent) {
    Tensor out = a->value;
    for (int i = 0; i < out.size(); ++i) out.flat(i) = std::pow(out.flat(i), exponent);
    return make_node(std::move(out), {a}, [exponent](Node& n) {
        Tensor da = n.grad;
        const Tensor& x = n.parents[0]->value;
        for (int i = 0; i < da.size(); ++i)
            da.flat(i) *= exponent * std::pow(x.flat(i), exponent - 1.0);
        n.parents[0]->accumulate(da);
    });
}

Var clamp(const Var& a, double lo, double hi) {
    Tensor out = a->value;
    for (int i = 0; i < out.size(); ++i) out.flat(i) = std::clamp(out.flat(i), lo, hi);
    return make_node(std::move(out), {a}, [lo, hi](Node& n) {
        Tensor da = n.grad;
        const Tensor& x = n.parents[0]->value;
        for (int i = 0; i < da.size(); ++i)
            if (x.flat(i) < lo || x.flat(i) > hi) da.flat(i) = 0.0;
        n.parents[0]->accumulate(da);
    });
}

Var l2_normalize_row(const Var& a) {
    const Tensor& av = a->value;
    if (av.rank() != 2 || av.rows() != 1) throw ShapeError("l2_normalize_row expects 1xD");
    double norm_sq = 0.0;
    for (int i = 0; i < av.size(); ++i) norm_sq += av.flat(i) * av.flat(i);
    const double norm = std::sqrt(norm_sq);
    Tensor out = av;
    if (norm > 1e-12) {
        for (int i = 0; i < out.size(); ++i) out.flat(i) /= norm;
    } else {
        out.fill(0.0);  // zero vectors normalize to zero
    }
    return make_node(std::move(out), {a}, [norm](Node& n) {
        Tensor da(n.parents[0]->value.shape());
        if (norm > 1e-12) {
            const Tensor& y = n.value;
            double dot = 0.0;
            for (int i = 0; i < y.size(); ++i) dot += n.grad.flat(i) * y.flat(i);
            for (int i = 0; i < y.size(); ++i)
                da.flat(i) = (n.grad.flat(i) - y.flat(i) * dot) / norm;
        }
        n.parents[0]->accumulate(da);
    });
}

Var conv2d(const Var& input, const Var& weight, const Var& bias, int stride) {
    const Tensor& x = input->value;
    const Tensor& w = weight->value;
    const Tensor& b = bias->value;
    if (x.rank() != 3 || w.rank() != 3 + 1) throw ShapeError("conv2d expects {C,H,W} and {OC,IC,KH,KW}");
    const int ic = x.dim(0), ih = x.dim(1), iw = x.dim(2);
    const int oc = w.dim(0), kic = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    if (kic != ic) throw ShapeError("conv2d channel mismatch");
    if (b.rank() != 2 || b.rows() != 1 || b.cols() != oc) throw ShapeError("conv2d bias must be 1xOC");
    if (ih < kh || iw < kw || stride < 1) throw ShapeError("conv2d kernel larger than input");
    const int oh = (ih - kh) / stride + 1;
    const int ow = (iw - kw) / stride + 1;
    Tensor out({oc, oh, ow});
    for (int o = 0; o < oc; ++o)
        for (int y = 0; y < oh; ++y)
            for (int xx = 0; xx < ow; ++xx) {
                double acc = b.at(0, o);
                for (int c = 0; c < ic; ++c)
                    for (int dy = 0; dy < kh; ++dy)
                        for (int dx = 0; dx < kw; ++dx)
                            acc += x.at3(c, y * stride + dy, xx * stride + dx) *
                                   w.data()[((static_cast<size_t>(o) * ic + c) * kh + dy) * kw + dx];
                out.at3(o, y, xx) = acc;
            }
    return make_node(std::move(out), {input, weight, bias}, [stride](Node& n) {
        const Tensor& g = n.grad;
        const Tensor& x = n.parents[0]->value;
        const Tensor& w = n.parents[1]->value;
        const int ic = x.dim(0), oc = w.dim(0), kh = w.dim(2), kw = w.dim(3);
        const int oh = g.dim(1), ow = g.dim(2);
        Tensor dx(x.shape());
        Tensor dw(w.shape());
        Tensor db({1, oc});
        for (int o = 0; o < oc; ++o)
            for (int y = 0; y < oh; ++y)
                for (int xx = 0; xx < ow; ++xx) {
                    const double gv = g.at3(o, y, xx);
                    if (gv == 0.0) continue;
                    db.at(0, o) += gv;
                    for (int c = 0; c < ic; ++c)
                        for (int dy = 0; dy < kh; ++dy)
                            for (int dxk = 0; dxk < kw; ++dxk) {
                                const size_t widx =
                                    ((static_cast<size_t>(o) * ic + c) * kh + dy) * kw + dxk;
                                dw.data()[widx] += gv * x.at3(c, y * stride + dy, xx * stride + dxk);
                                dx.at3(c, y * stride + dy, xx * stride + dxk) += gv * w.data()[widx];
                            }
                }
        n.parents[0]->accumulate(dx);
        n.parents[1]->accumulate(dw);
        n.parents[2]->accumulate(db);
    });
}

Var global_avg_pool(const Var& input) {
    const Tensor& x = input->value;
    if (x.rank() != 3) throw ShapeError("global_avg_pool expects {C,H,W}");
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor out({1, c});
    for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) acc += x.at3(ch, y, xx);
        out.at(0, ch) = acc / (h * w);
    }
    return make_node(std::move(out), {input}, [](Node& n) {
        const Tensor& x = n.parents[0]->value;
        const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
        Tensor dx(x.shape());
        for (int ch = 0; ch < c; ++ch) {
            const double gv = n.grad.at(0, ch) / (h * w);
            for (int y = 0; y < h; ++y)
                for (int xx = 0; xx < w; ++xx) dx.at3(ch, y, xx) = gv;
        }
        n.parents[0]->accumulate(dx);
    });
}

Var mean_all(const Var& a) {
    double acc = 0.0;
    for (int i = 0; i < a->value.size(); ++i) acc += a->value.flat(i);
    const int n = a->value.size();
    Tensor out({1, 1});
    out.at(0, 0) = acc / n;
    return make_node(std::move(out), {a}, [n](Node& node) {
        Tensor da(node.parents[0]->value.shape());
        const double g = node.grad.at(0, 0) / n;
        for (int i = 0; i < da.size(); ++i) da.flat(i) = g;
        node.parents[0]->accumulate(da);
    });
}

Var sum_all(const Var& a) {
    double acc = 0.0;
    for (int i = 0; i < a->value.size(); ++i) acc += a->value.flat(i);
    Tensor out({1, 1});
    out.at(0, 0) = acc;
    return make_node(std::move(out), {a}, [](Node& node) {
        Tensor da(node.parents[0]->value.shape());
        const double g = node.grad.at(0, 0);
        for (int i = 0; i < da.size(); ++i) da.flat(i) = g;
        node.parents[0]->accumulate(da);
    });
}

Var mul_mask(const Var& a, Tensor mask) {
    if (!a->value.same_shape(mask)) throw ShapeError("mul_mask shape mismatch");
    Tensor out = a->value;
    for (int i = 0; i < out.size(); ++i) out.flat(i) *= mask.flat(i);
    return make_node(std::move(out), {a}, [mask = std::move(mask)](Node& n) {
        Tensor da = n.grad;
        for (int i = 0; i < da.size(); ++i) da.flat(i) *= mask.flat(i);
        n.parents[0]->accumulate(da);
    });
}

Var attention(const Var& q, const Var& k, const Var& v, const std::optional<Tensor>& mask) {
    const Tensor& qv = q->value;
    const Tensor& kv = k->value;
    const Tensor& vv = v->value;
    if (qv.rank() != 2 || kv.rank() != 2 || vv.rank() != 2)
        throw ShapeError("attention expects rank-2 Q/K/V");
    if (qv.cols() != kv.cols()) throw ShapeError("attention: Q/K dim mismatch");
    if (kv.rows() != vv.rows()) throw ShapeError("attention: K/V length mismatch");
    if (kv.cols() <= 0) throw ShapeError("attention: d_k must be positive");
    Var logits = scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(qv.cols())));
    if (mask) {
        if (!logits->value.same_shape(*mask)) throw ShapeError("attention mask shape mismatch");
        logits = add(logits, constant(*mask));
    }
    return matmul(softmax_rows(logits), v);
}

void backward(const Var& loss) {
    if (loss->value.size() != 1) throw ShapeError("backward expects a scalar node");
    if (!loss->requires_grad) return;

    // Post-order DFS over the requires_grad subgraph.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(loss.get(), 0);
    visited.insert(loss.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        bool descended = false;
        while (idx < node->parents.size()) {
            Node* p = node->parents[idx++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
                descended = true;
                break;
            }
        }
        if (!descended && (stack.back().second >= stack.back().first->parents.size())) {
            order.push_back(stack.back().first);
            stack.pop_back();
        }
    }

    loss->grad = Tensor({1, 1});
    loss->grad.at(0, 0) = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backprop && n->grad.size() != 0) n->backprop(*n);
    }
}

}  // namespace hoi
