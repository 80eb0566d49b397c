#include "grbert/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace grbert {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) throw ContractError(std::string(op) + ": shape mismatch");
}

void require_rank2(const Tensor& a, const char* op) {
    if (a.ndim() != 2) throw ContractError(std::string(op) + ": rank-2 tensor expected");
}

void require_rank1(const Tensor& a, const char* op) {
    if (a.ndim() != 1) throw ContractError(std::string(op) + ": rank-1 tensor expected");
}

double gelu_fwd(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_bwd(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + x * pdf;
}

}  // namespace

Value Tape::push(Tensor value, bool needs, std::function<void(Tape&)> back) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Value{static_cast<int>(nodes_.size()) - 1};
}

Value Tape::leaf(Tensor t) {
    t.check_finite("tape leaf");
    const bool req = t.requires_grad();
    return push(std::move(t), req, nullptr);
}

Value Tape::constant(Tensor t) {
    t.check_finite("tape constant");
    return push(std::move(t), false, nullptr);
}

const Tensor& Tape::grad(Value v) const {
    const Node& n = node(v.id);
    if (!n.grad_ready) throw ContractError("Tape::grad: backward has not reached this node");
    return n.grad;
}

Tensor& Tape::grad_buf(int id) {
    Node& n = node(id);
    if (!n.grad_ready) {
        if (n.value.is_scalar()) {
            n.grad = Tensor::scalar(0.0);
        } else {
            n.grad = Tensor::zeros(n.value.shape());
        }
        n.grad_ready = true;
    }
    return n.grad;
}

void Tape::backward(Value loss) {
    if (!loss.valid() || static_cast<std::size_t>(loss.id) >= nodes_.size())
        throw ContractError("backward: invalid loss node");
    if (node(loss.id).value.numel() != 1)
        throw ContractError("backward: loss must be scalar");
    for (Node& n : nodes_) n.grad_ready = false;
    grad_buf(loss.id)[0] = 1.0;
    for (int id = loss.id; id >= 0; --id) {
        Node& n = node(id);
        if (!n.needs_grad || !n.grad_ready || !n.back) continue;
        n.back(*this);
    }
    // Leaves the caller never reached keep zero gradients.
    for (Node& n : nodes_) {
        if (n.needs_grad && !n.grad_ready) {
            if (n.value.is_scalar()) {
                n.grad = Tensor::scalar(0.0);
            } else {
                n.grad = Tensor::zeros(n.value.shape());
            }
            n.grad_ready = true;
        }
    }
}

// ---------------------------------------------------------------------------

Value Tape::add(Value a, Value b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    require_same_shape(ta, tb, "add");
    Tensor out = ta;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] += tb[i];
    const bool req = requires_grad(a) || requires_grad(b);
    const Value self{static_cast<int>(nodes_.size())};
    const int ia = a.id, ib = b.id;
    return push(std::move(out), req, [self, ia, ib](Tape& t) {
        const Tensor& g = t.node(self.id).grad;
        if (t.node(ia).needs_grad) {
            Tensor& da = t.grad_buf(ia);
            for (std::size_t i = 0; i < g.numel(); ++i) da[i] += g[i];
        }
        if (t.node(ib).needs_grad) {
            Tensor& db = t.grad_buf(ib);
            for (std::size_t i = 0; i < g.numel(); ++i) db[i] += g[i];
        }
    });
}

Value Tape::sub(Value a, Value b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    require_same_shape(ta, tb, "sub");
    Tensor out = ta;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= tb[i];
    const bool req = requires_grad(a) || requires_grad(b);
    const Value self{static_cast<int>(nodes_.size())};
    const int ia = a.id, ib = b.id;
    return push(std::move(out), req, [self, ia, ib](Tape& t) {
        const Tensor& g = t.node(self.id).grad;
        if (t.node(ia).needs_grad) {
            Tensor& da = t.grad_buf(ia);
            for (std::size_t i = 0; i < g.numel(); ++i) da[i] += g[i];
        }
        if (t.node(ib).needs_grad) {
            Tensor& db = t.grad_buf(ib);
            for (std::size_t i = 0; i < g.numel(); ++i) db[i] -= g[i];
        }
    });
}

Value Tape::mul(Value a, Value b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    require_same_shape(ta, tb, "mul");
    Tensor out = ta;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= tb[i];
    const bool req = requires_grad(a) || requires_grad(b);
    const Value self{static_cast<int>(nodes_.size())};
    const int ia = a.id, ib = b.id;
    return push(std::move(out), req, [self, ia, ib](Tape& t) {
        const Tensor& g = t.node(self.id).grad;
        const Tensor& va = t.node(ia).value;
        const Tensor& vb = t.node(ib).value;
        if (t.node(ia).needs_grad) {
            Tensor& da = t.grad_buf(ia);
            for (std::size_t i = 0; i < g.numel(); ++i) da[i] += g[i] * vb[i];
        }
        if (t.node(ib).needs_grad) {
            Tensor& db = t.grad_buf(ib);
            for (std::size_t i = 0; i < g.numel(); ++i) db[i] += g[i] * va[i];
        }
    });
}

Value Tape::scale(Value a, double s) {
    if (!std::isfinite(s)) throw NumericError("scale: non-finite factor");
    Tensor out = value(a);
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= s;
    const Value self{static_cast<int>(nodes_.size())};
    const int ia = a.id;
    return push(std::move(out), requires_grad(a), [self, ia, s](Tape& t) {
        const Tensor& g = t.node(self.id).grad;
        if (t.node(ia).needs_grad) {
            Tensor& da = t.grad_buf(ia);
            for (std::size_t i = 0; i < g.numel(); ++i) da[i] += s * g[i];
        }
    });
}

Value Tape::add_bias(Value a, Value bias) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(bias);
    require_rank2(ta, "add_bias");
    require_rank1(tb, "add_bias");
    if (ta.shape()[1] != tb.shape()[0]) throw ContractError("add_bias: width mismatch");
    Tensor out = ta;
    const std::size_t n = ta.shape()[0], m = ta.shape()[1];
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) out.at(i, j) += tb[j];
    const bool req = requires_grad(a) || requires_grad(bias);
    const Value self{static_cast<int>(nodes_.size())};
    const int ia = a.id, ib = bias.id;
    return push(std::move(out), req, [self, ia, ib, n, m](Tape& t) {
        const Tensor& g = t.node(self.id).grad;
        if (t.node(ia).needs_grad) {
            Tensor& da = t.grad_buf(ia);
            for (std::size_t i = 0; i < g.numel(); ++i) da[i] += g[i];
        }
        if (t.node(ib).needs_grad) {
            Tensor& db = t.grad_buf(ib);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < m; ++j) db[j] += g.at(i, j);
        }
    });
}

Value Tape::matmul(Value a, Value b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    require_rank2(ta, "matmul");
    require_rank2(tb, "matmul");
    if (ta.shape()[1] != tb.shape()[0]) throw ContractError("matmul: inner dim mismatch");
    Tensor out = Tensor::zeros({ta.shape()[0], tb.shape()[1]});
    kernels::matmul_acc(ta, tb, out);
    const bool req = requires_grad(a) || requires_grad(b);
    const Value self{static_cast<int>(nodes_.size())};
    const int ia = a.id, ib = b.id;
    return push(std::move(out), req, [self, ia, ib](Tape& t) {
        const Tensor& g = t.node(self.id).grad;
        const Tensor& va = t.node(ia).value;
        const Tensor& vb = t.node(ib).value;
        if (t.node(ia).needs_grad) kernels::matmul_nt_acc(g, vb, t.grad_buf(ia));
        if (t.node(ib).needs_grad) kernels::matmul_tn_acc(va, g, t.grad_buf(ib));
    });
}

Value Tape::matmul_nt(Value a, Value b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    require_rank2(ta, "matmul_nt");
    require_rank2(tb, "matmul_nt");
    if (ta.shape()[1] != tb.shape()[1]) throw ContractError("matmul_nt: inner dim mismatch");
    Tensor out = Tensor::zeros({ta.shape()[0], tb.shape()[0]});
    kernels::matmul_nt_acc(ta, tb, out);
    const bool req = requires_grad(a) || requires_grad(b);
    const Value self{static_cast<int>(nodes_.size())};
    const int ia = a.id, ib = b.id;
    return push(std::move(out), req, [self, ia, ib](Tape& t) {
        const Tensor& g = t.node(self.id).grad;
        const Tensor& va = t.node(ia).value;
        const Tensor& vb = t.node(ib).value;
        if (t.node(ia).needs_grad) kernels::matmul_acc(g, vb, t.grad_buf(ia));
        if (t.node(ib).needs_grad) kernels::matmul_tn_acc(g, va, t.grad_buf(ib));
    });
}

Value Tape::rows_select(Value a, std::vector<std::size_t> idx) {
    const Tensor& ta = value(a);
    require_rank2(ta, "rows_select");
    const std::size_t m = ta.shape()[1];
    Tensor out = Tensor::zeros({idx.size(), m});
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= ta.shape()[0]) throw ContractError("rows_select: index out of range");
        for (std::size_t j = 0; j < m; ++j) out.at(i, j) = ta.at(idx[i], j);
    }
    const Value self{static_cast<int>(nodes_.size())};
    const int ia = a.id;
    return push(std::move(out), requires_grad(a), [self, ia, idx = std::move(idx), m](Tape& t) {
        const Tensor& g = t.node(self.id).grad;
        if (!t.node(ia).needs_grad) return;
        Tensor& da = t.grad_buf(ia);
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t j = 0; j < m; ++j) da.at(idx[i], j) += g.at(i, j);
    });
}

Value Tape::row(Value a, std::size_t i) {
    const Tensor& ta = value(a);
    require_rank2(ta, "row");
    if (i >= ta.shape()[0]) throw ContractError("row: index out of range");
    const std::size_t m = ta.shape()[1];
    Tensor out = Tensor::zeros({m});
    for (std::size_t j = 0; j < m; ++j) out[j] = ta.at(i, j);
    const Value self{static_cast<int>(nodes_.size())};
    const int ia = a.id;
    return push(std::move(out), requires_grad(a), [self, ia, i, m](Tape& t) {
        const Tensor& g = t.node(self.id).grad;
        if (!t.node(ia).needs_grad) return;
        Tensor& da = t.grad_buf(ia);
        for (std::size_t j = 0; j < m; ++j) da.at(i, j) += g[j];
    });
}

Value Tape::col_slice(Value a, std::size_t c0, std::size_t c1) {
    const Tensor& ta = value(a);
    require_rank2(ta, "col_slice");
    if (c0 >= c1 || c1 > ta.shape()[1]) throw ContractError("col_slice: bad column range");
    const std::size_t n = ta.shape()[0], w = c1 - c0;
    Tensor out = Tensor::zeros({n, w});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < w; ++j) out.at(i, j) = ta.at(i, c0 + j);
    const Value self{static_cast<int>(nodes_.size())};
    const int ia = a.id;
    return push(std::move(out), requires_grad(a), [self, ia, c0, n, w](Tape& t) {
        const Tensor& g = t.node(self.id).grad;
        if (!t.node(ia).needs_grad) return;
        Tensor& da = t.grad_buf(ia);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < w; ++j) da.at(i, c0 + j) += g.at(i, j);
    });
}

Value Tape::concat_cols(const std::vector<Value>& parts) {
    if (parts.empty()) throw ContractError("concat_cols: no inputs");
    const std::size_t n = value(parts[0]).shape()[0];
    std::size_t total = 0;
    bool req = false;
    for (const Value& p : parts) {
        const Tensor& tp = value(p);
        require_rank2(tp, "concat_cols");
        if (tp.shape()[0] != n) throw ContractError("concat_cols: row count mismatch");
        total += tp.shape()[1];
        req = req || requires_grad(p);
    }
    Tensor out = Tensor::zeros({n, total});
    std::size_t off = 0;
    std::vector<int> ids;
    std::vector<std::size_t> widths;
    for (const Value& p : parts) {
        const Tensor& tp = value(p);
        const std::size_t w = tp.shape()[1];
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < w; ++j) out.at(i, off + j) = tp.at(i, j);
        ids.push_back(p.id);
        widths.push_back(w);
        off += w;
    }
    const Value self{static_cast<int>(nodes_.size())};
    return push(std::move(out), req,
                [self, ids = std::move(ids), widths = std::move(widths), n](Tape& t) {
                    const Tensor& g = t.node(self.id).grad;
                    std::size_t off = 0;
                    for (std::size_t p = 0; p < ids.size(); ++p) {
                        const std::size_t w = widths[p];
                        if (t.node(ids[p]).needs_grad) {
                            Tensor& dp = t.grad_buf(ids[p]);
                            for (std::size_t i = 0; i < n; ++i)
                                for (std::size_t j = 0; j < w; ++j)
                                    dp.at(i, j) += g.at(i, off + j);
                        }
                        off += w;
                    }
                });
}

Value Tape::layer_norm(Value x, Value gain, Value bias, double eps) {
    const Tensor& tx = value(x);
    const Tensor& tg = value(gain);
    const Tensor& tb = value(bias);
    require_rank2(tx, "layer_norm");
    require_rank1(tg, "layer_norm");
    require_rank1(tb, "layer_norm");
    const std::size_t n = tx.shape()[0], d = tx.shape()[1];
    if (tg.shape()[0] != d || tb.shape()[0] != d)
        throw ContractError("layer_norm: parameter width mismatch");
    Tensor out = Tensor::zeros({n, d});
    Tensor xhat = Tensor::zeros({n, d});
    Tensor inv_sigma = Tensor::zeros({n});
    for (std::size_t i = 0; i < n; ++i) {
        double mu = 0.0;
        for (std::size_t j = 0; j < d; ++j) mu += tx.at(i, j);
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double c = tx.at(i, j) - mu;
            var += c * c;
        }
        var /= static_cast<double>(d);
        const double inv = 1.0 / std::sqrt(var + eps);
        inv_sigma[i] = inv;
        for (std::size_t j = 0; j < d; ++j) {
            xhat.at(i, j) = (tx.at(i, j) - mu) * inv;
            out.at(i, j) = tg[j] * xhat.at(i, j) + tb[j];
        }
    }
    const bool req = requires_grad(x) || requires_grad(gain) || requires_grad(bias);
    const Value self{static_cast<int>(nodes_.size())};
    const int ix = x.id, ig = gain.id, ib = bias.id;
    return push(std::move(out), req,
                [self, ix, ig, ib, n, d, xhat = std::move(xhat),
                 inv_sigma = std::move(inv_sigma)](Tape& t) {
                    const Tensor& g = t.node(self.id).grad;
                    const Tensor& tg = t.node(ig).value;
                    if (t.node(ig).needs_grad) {
                        Tensor& dg = t.grad_buf(ig);
                        for (std::size_t i = 0; i < n; ++i)
                            for (std::size_t j = 0; j < d; ++j)
                                dg[j] += g.at(i, j) * xhat.at(i, j);
                    }
                    if (t.node(ib).needs_grad) {
                        Tensor& db = t.grad_buf(ib);
                        for (std::size_t i = 0; i < n; ++i)
                            for (std::size_t j = 0; j < d; ++j) db[j] += g.at(i, j);
                    }
                    if (t.node(ix).needs_grad) {
                        Tensor& dx = t.grad_buf(ix);
                        for (std::size_t i = 0; i < n; ++i) {
                            double mean_dh = 0.0, mean_dh_xhat = 0.0;
                            for (std::size_t j = 0; j < d; ++j) {
                                const double dh = g.at(i, j) * tg[j];
                                mean_dh += dh;
                                mean_dh_xhat += dh * xhat.at(i, j);
                            }
                            mean_dh /= static_cast<double>(d);
                            mean_dh_xhat /= static_cast<double>(d);
                            for (std::size_t j = 0; j < d; ++j) {
                                const double dh = g.at(i, j) * tg[j];
                                dx.at(i, j) += inv_sigma[i] *
                                               (dh - mean_dh - xhat.at(i, j) * mean_dh_xhat);
                            }
                        }
                    }
                });
}

Value Tape::gelu(Value x) {
    const Tensor& tx = value(x);
    Tensor out = tx;
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = gelu_fwd(tx[i]);
    const Value self{static_cast<int>(nodes_.size())};
    const int ix = x.id;
    return push(std::move(out), requires_grad(x), [self, ix](Tape& t) {
        const Tensor& g = t.node(self.id).grad;
        const Tensor& vx = t.node(ix).value;
        if (!t.node(ix).needs_grad) return;
        Tensor& dx = t.grad_buf(ix);
        for (std::size_t i = 0; i < g.numel(); ++i) dx[i] += g[i] * gelu_bwd(vx[i]);
    });
}

Value Tape::softmax_rows(Value x, std::vector<bool> col_keep) {
    const Tensor& tx = value(x);
    require_rank2(tx, "softmax_rows");
    const std::size_t n = tx.shape()[0], m = tx.shape()[1];
    if (col_keep.size() != m) throw ContractError("softmax_rows: mask width mismatch");
    std::size_t kept = 0;
    for (bool b : col_keep) kept += b ? 1 : 0;
    if (kept == 0) throw ContractError("softmax_rows: all columns masked");
    Tensor out = Tensor::zeros({n, m});
    for (std::size_t i = 0; i < n; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < m; ++j) {
            if (!col_keep[j]) continue;
            if (!std::isfinite(tx.at(i, j))) throw NumericError("softmax_rows: non-finite logit");
            mx = std::max(mx, tx.at(i, j));
        }
        double denom = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            if (!col_keep[j]) continue;
            out.at(i, j) = std::exp(tx.at(i, j) - mx);
            denom += out.at(i, j);
        }
        for (std::size_t j = 0; j < m; ++j) {
            if (col_keep[j]) out.at(i, j) /= denom;
        }
    }
    const Value self{static_cast<int>(nodes_.size())};
    const int ix = x.id;
    Tensor probs = out;  // backward needs the outputs
    return push(std::move(out), requires_grad(x),
                [self, ix, n, m, col_keep = std::move(col_keep),
                 probs = std::move(probs)](Tape& t) {
                    const Tensor& g = t.node(self.id).grad;
                    if (!t.node(ix).needs_grad) return;
                    Tensor& dx = t.grad_buf(ix);
                    for (std::size_t i = 0; i < n; ++i) {
                        double acc = 0.0;
                        for (std::size_t j = 0; j < m; ++j) {
                            if (col_keep[j]) acc += g.at(i, j) * probs.at(i, j);
                        }
                        for (std::size_t j = 0; j < m; ++j) {
                            if (col_keep[j])
                                dx.at(i, j) += probs.at(i, j) * (g.at(i, j) - acc);
                        }
                    }
                });
}

Value Tape::mean_rows(Value x, std::vector<bool> row_keep) {
    const Tensor& tx = value(x);
    require_rank2(tx, "mean_rows");
    const std::size_t n = tx.shape()[0], m = tx.shape()[1];
    if (row_keep.size() != n) throw ContractError("mean_rows: mask length mismatch");
    std::size_t kept = 0;
    for (bool b : row_keep) kept += b ? 1 : 0;
    if (kept == 0) throw ContractError("mean_rows: all rows masked");
    Tensor out = Tensor::zeros({m});
    for (std::size_t i = 0; i < n; ++i) {
        if (!row_keep[i]) continue;
        for (std::size_t j = 0; j < m; ++j) out[j] += tx.at(i, j);
    }
    const double inv = 1.0 / static_cast<double>(kept);
    for (std::size_t j = 0; j < m; ++j) out[j] *= inv;
    const Value self{static_cast<int>(nodes_.size())};
    const int ix = x.id;
    return push(std::move(out), requires_grad(x),
                [self, ix, n, m, inv, row_keep = std::move(row_keep)](Tape& t) {
                    const Tensor& g = t.node(self.id).grad;
                    if (!t.node(ix).needs_grad) return;
                    Tensor& dx = t.grad_buf(ix);
                    for (std::size_t i = 0; i < n; ++i) {
                        if (!row_keep[i]) continue;
                        for (std::size_t j = 0; j < m; ++j) dx.at(i, j) += g[j] * inv;
                    }
                });
}

Value Tape::cross_entropy_mean(Value logits, std::vector<std::size_t> targets) {
    const Tensor& tl = value(logits);
    require_rank2(tl, "cross_entropy_mean");
    const std::size_t n = tl.shape()[0], v = tl.shape()[1];
    if (targets.size() != n) throw ContractError("cross_entropy_mean: target count mismatch");
    for (std::size_t t : targets)
        if (t >= v) throw ContractError("cross_entropy_mean: target out of range");
    Tensor probs = Tensor::zeros({n, v});
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double mx = tl.at(i, 0);
        for (std::size_t j = 0; j < v; ++j) {
            if (!std::isfinite(tl.at(i, j)))
                throw NumericError("cross_entropy_mean: non-finite logit");
            mx = std::max(mx, tl.at(i, j));
        }
        double denom = 0.0;
        for (std::size_t j = 0; j < v; ++j) {
            probs.at(i, j) = std::exp(tl.at(i, j) - mx);
            denom += probs.at(i, j);
        }
        for (std::size_t j = 0; j < v; ++j) probs.at(i, j) /= denom;
        loss += (mx + std::log(denom)) - tl.at(i, targets[i]);
    }
    loss /= static_cast<double>(n);
    const Value self{static_cast<int>(nodes_.size())};
    const int il = logits.id;
    return push(Tensor::scalar(loss), requires_grad(logits),
                [self, il, n, v, targets = std::move(targets),
                 probs = std::move(probs)](Tape& t) {
                    const double g = t.node(self.id).grad[0];
                    if (!t.node(il).needs_grad) return;
                    Tensor& dl = t.grad_buf(il);
                    const double inv = g / static_cast<double>(n);
                    for (std::size_t i = 0; i < n; ++i) {
                        for (std::size_t j = 0; j < v; ++j)
                            dl.at(i, j) += inv * probs.at(i, j);
                        dl.at(i, targets[i]) -= inv;
                    }
                });
}

Value Tape::cosine(Value a, Value b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    require_rank1(ta, "cosine");
    require_rank1(tb, "cosine");
    if (ta.numel() != tb.numel()) throw ContractError("cosine: length mismatch");
    const double ab = kernels::dot(ta, tb);
    const double na = kernels::norm(ta);
    const double nb = kernels::norm(tb);
    if (na == 0.0 || nb == 0.0) throw DegenerateInputError("cosine: zero-norm vector");
    const double c = ab / (na * nb);
    const bool req = requires_grad(a) || requires_grad(b);
    const Value self{static_cast<int>(nodes_.size())};
    const int ia = a.id, ib = b.id;
    return push(Tensor::scalar(c), req, [self, ia, ib, na, nb, c](Tape& t) {
        const double g = t.node(self.id).grad[0];
        const Tensor& va = t.node(ia).value;
        const Tensor& vb = t.node(ib).value;
        if (t.node(ia).needs_grad) {
            Tensor& da = t.grad_buf(ia);
            for (std::size_t i = 0; i < va.numel(); ++i)
                da[i] += g * (vb[i] / (na * nb) - c * va[i] / (na * na));
        }
        if (t.node(ib).needs_grad) {
            Tensor& db = t.grad_buf(ib);
            for (std::size_t i = 0; i < vb.numel(); ++i)
                db[i] += g * (va[i] / (na * nb) - c * vb[i] / (nb * nb));
        }
    });
}

Value Tape::stack_scalars(const std::vector<Value>& xs) {
    if (xs.empty()) throw ContractError("stack_scalars: no inputs");
    Tensor out = Tensor::zeros({xs.size()});
    bool req = false;
    std::vector<int> ids;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const Tensor& tv = value(xs[i]);
        if (tv.numel() != 1) throw ContractError("stack_scalars: non-scalar input");
        out[i] = tv[0];
        req = req || requires_grad(xs[i]);
        ids.push_back(xs[i].id);
    }
    const Value self{static_cast<int>(nodes_.size())};
    return push(std::move(out), req, [self, ids = std::move(ids)](Tape& t) {
        const Tensor& g = t.node(self.id).grad;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (t.node(ids[i]).needs_grad) t.grad_buf(ids[i])[0] += g[i];
        }
    });
}

Value Tape::pick(Value v, std::size_t i) {
    const Tensor& tv = value(v);
    require_rank1(tv, "pick");
    if (i >= tv.numel()) throw ContractError("pick: index out of range");
    const Value self{static_cast<int>(nodes_.size())};
    const int iv = v.id;
    return push(Tensor::scalar(tv[i]), requires_grad(v), [self, iv, i](Tape& t) {
        const double g = t.node(self.id).grad[0];
        if (t.node(iv).needs_grad) t.grad_buf(iv)[i] += g;
    });
}

Value Tape::log_sum_exp(Value v) {
    const Tensor& tv = value(v);
    require_rank1(tv, "log_sum_exp");
    double mx = tv[0];
    for (std::size_t i = 0; i < tv.numel(); ++i) {
        if (!std::isfinite(tv[i])) throw NumericError("log_sum_exp: non-finite input");
        mx = std::max(mx, tv[i]);
    }
    Tensor probs = Tensor::zeros({tv.numel()});
    double denom = 0.0;
    for (std::size_t i = 0; i < tv.numel(); ++i) {
        probs[i] = std::exp(tv[i] - mx);
        denom += probs[i];
    }
    for (std::size_t i = 0; i < tv.numel(); ++i) probs[i] /= denom;
    const double lse = mx + std::log(denom);
    const Value self{static_cast<int>(nodes_.size())};
    const int iv = v.id;
    return push(Tensor::scalar(lse), requires_grad(v),
                [self, iv, probs = std::move(probs)](Tape& t) {
                    const double g = t.node(self.id).grad[0];
                    if (!t.node(iv).needs_grad) return;
                    Tensor& dv = t.grad_buf(iv);
                    for (std::size_t i = 0; i < probs.numel(); ++i) dv[i] += g * probs[i];
                });
}

Value Tape::sum(Value a) {
    const Tensor& ta = value(a);
    double acc = 0.0;
    for (std::size_t i = 0; i < ta.numel(); ++i) acc += ta[i];
    const Value self{static_cast<int>(nodes_.size())};
    const int ia = a.id;
    return push(Tensor::scalar(acc), requires_grad(a), [self, ia](Tape& t) {
        const double g = t.node(self.id).grad[0];
        if (!t.node(ia).needs_grad) return;
        Tensor& da = t.grad_buf(ia);
        for (std::size_t i = 0; i < da.numel(); ++i) da[i] += g;
    });
}

Value Tape::dot(Value a, Value b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    if (ta.numel() != tb.numel()) throw ContractError("dot: length mismatch");
    const double d = kernels::dot(ta, tb);
    const bool req = requires_grad(a) || requires_grad(b);
    const Value self{static_cast<int>(nodes_.size())};
    const int ia = a.id, ib = b.id;
    return push(Tensor::scalar(d), req, [self, ia, ib](Tape& t) {
        const double g = t.node(self.id).grad[0];
        const Tensor& va = t.node(ia).value;
        const Tensor& vb = t.node(ib).value;
        if (t.node(ia).needs_grad) {
            Tensor& da = t.grad_buf(ia);
            for (std::size_t i = 0; i < va.numel(); ++i) da[i] += g * vb[i];
        }
        if (t.node(ib).needs_grad) {
            Tensor& db = t.grad_buf(ib);
            for (std::size_t i = 0; i < vb.numel(); ++i) db[i] += g * va[i];
        }
    });
}

}  // namespace grbert
