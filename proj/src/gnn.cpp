#include "gep/gnn.hpp"

#include <cmath>
#include <cstring>
#include <string_view>

#include "gep/numerics.hpp"

namespace gep {
namespace {

Matrix relu(const Matrix& m) { return m.cwiseMax(0.0); }

// In-place multiply by the ReLU subgradient taken from the stored
// post-activation values (0 at exactly 0).
void relu_backward(const Matrix& post, Matrix* grad) {
  grad->array() *= (post.array() > 0.0).cast<double>();
}

Matrix sigmoid_mat(const Matrix& m) {
  return m.unaryExpr([](double x) { return sigmoid(x); });
}

}  // namespace

void GnnHyperparams::validate() const {
  if (n_u <= 0 || n_h1 <= 0 || n_h2 <= 0 || rounds <= 0) {
    throw ConfigError("network hyperparameters must be positive");
  }
}

GnnParameters GnnParameters::zeros(const GnnHyperparams& hp, int m_levels) {
  hp.validate();
  if (m_levels < 2) throw ConfigError("need at least two output classes");
  auto lin = [](int rows, int cols) {
    return Linear{Matrix::Zero(rows, cols), Vector::Zero(rows)};
  };
  GnnParameters p;
  p.embed = lin(hp.n_u, 3);
  p.msg1 = lin(hp.n_h1, 2 * hp.n_u + 2);
  p.msg2 = lin(hp.n_h2, hp.n_h1);
  p.msg3 = lin(hp.n_u, hp.n_h2);
  p.gru_wi = Matrix::Zero(3 * hp.n_h1, hp.n_u + 2);
  p.gru_wh = Matrix::Zero(3 * hp.n_h1, hp.n_h1);
  p.gru_bi = Vector::Zero(3 * hp.n_h1);
  p.gru_bh = Vector::Zero(3 * hp.n_h1);
  p.out = lin(hp.n_u, hp.n_h1);
  p.read1 = lin(hp.n_h1, hp.n_u);
  p.read2 = lin(hp.n_h2, hp.n_h1);
  p.read3 = lin(m_levels, hp.n_h2);
  return p;
}

std::vector<TensorView> tensor_views(GnnParameters& p) {
  auto mat = [](const char* n, Matrix& m) {
    return TensorView{n, m.data(), m.rows(), m.cols()};
  };
  auto vec = [](const char* n, Vector& v) {
    return TensorView{n, v.data(), v.size(), 1};
  };
  return {
      mat("embed.w", p.embed.w),  vec("embed.b", p.embed.b),
      mat("msg1.w", p.msg1.w),    vec("msg1.b", p.msg1.b),
      mat("msg2.w", p.msg2.w),    vec("msg2.b", p.msg2.b),
      mat("msg3.w", p.msg3.w),    vec("msg3.b", p.msg3.b),
      mat("gru.wi", p.gru_wi),    mat("gru.wh", p.gru_wh),
      vec("gru.bi", p.gru_bi),    vec("gru.bh", p.gru_bh),
      mat("out.w", p.out.w),      vec("out.b", p.out.b),
      mat("read1.w", p.read1.w),  vec("read1.b", p.read1.b),
      mat("read2.w", p.read2.w),  vec("read2.b", p.read2.b),
      mat("read3.w", p.read3.w),  vec("read3.b", p.read3.b),
  };
}

GnnParameters glorot_init(const GnnHyperparams& hp, int m_levels, Rng& rng) {
  GnnParameters p = GnnParameters::zeros(hp, m_levels);
  for (TensorView& t : tensor_views(p)) {
    const bool bias = std::string_view(t.name).find(".b") != std::string_view::npos;
    if (bias) continue;
    const double sd = std::sqrt(2.0 / static_cast<double>(t.rows + t.cols));
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data[i] = rng.normal(0.0, sd);
  }
  return p;
}

AdamState adam_init(GnnParameters& params) {
  AdamState s;
  for (const TensorView& t : tensor_views(params)) {
    s.m.push_back(Matrix::Zero(t.rows, t.cols));
    s.v.push_back(Matrix::Zero(t.rows, t.cols));
  }
  return s;
}

void adam_step(GnnParameters* params, GnnParameters* grads, AdamState* state,
               const AdamConfig& cfg) {
  auto pv = tensor_views(*params);
  auto gv = tensor_views(*grads);
  if (pv.size() != gv.size() || pv.size() != state->m.size()) {
    throw Error("adam_step: mismatched parameter/gradient/state layout");
  }
  state->step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state->step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state->step));
  for (size_t i = 0; i < pv.size(); ++i) {
    Eigen::Map<Matrix> theta(pv[i].data, pv[i].rows, pv[i].cols);
    Eigen::Map<const Matrix> g(gv[i].data, gv[i].rows, gv[i].cols);
    Matrix& m = state->m[i];
    Matrix& v = state->v[i];
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    theta.array() -= cfg.lr * (m.array() / bc1) /
                     ((v.array() / bc2).sqrt() + cfg.eps);
  }
}

GnnCore::GnnCore(const GnnParameters& params, const GnnHyperparams& hp,
                 GnnBatch batch)
    : p_(params), hp_(hp), batch_(std::move(batch)) {
  hp.validate();
  if (batch_.node_init.rows() != 3 ||
      batch_.node_init.cols() != batch_.n_node_cols()) {
    throw InvalidLength("graph batch: node init feature shape mismatch");
  }
  if (batch_.edge_feat.rows() != 2 ||
      batch_.edge_feat.cols() != batch_.n_edges() ||
      batch_.edge_dst.size() != batch_.edge_src.size()) {
    throw InvalidLength("graph batch: edge layout mismatch");
  }
  mask_.assign(batch_.n_edges(), 1);
  if (!batch_.edge_active.empty()) {
    if (batch_.edge_active.size() != batch_.edge_src.size()) {
      throw InvalidLength("graph batch: edge mask length mismatch");
    }
    mask_ = batch_.edge_active;
  }
}

void GnnCore::begin() {
  u_ = (p_.embed.w * batch_.node_init).colwise() + p_.embed.b;
  g_ = Matrix::Zero(hp_.n_h1, batch_.n_node_cols());
  layers_.clear();
}

void GnnCore::set_edge_mask(const std::vector<std::uint8_t>& active) {
  if (static_cast<int>(active.size()) != batch_.n_edges()) {
    throw InvalidLength("edge mask length mismatch");
  }
  mask_ = active;
}

void GnnCore::run_round(RoundTape* t) {
  const int nu = hp_.n_u;
  const int e_count = batch_.n_edges();
  t->u_in = u_;
  t->mask = mask_;

  Matrix edge_in(2 * nu + 2, e_count);
  for (int e = 0; e < e_count; ++e) {
    edge_in.col(e).segment(0, nu) = u_.col(batch_.edge_dst[e]);
    edge_in.col(e).segment(nu, nu) = u_.col(batch_.edge_src[e]);
    edge_in.col(e).tail(2) = batch_.edge_feat.col(e);
  }
  t->h1 = relu((p_.msg1.w * edge_in).colwise() + p_.msg1.b);
  t->h2 = relu((p_.msg2.w * t->h1).colwise() + p_.msg2.b);
  t->msg = (p_.msg3.w * t->h2).colwise() + p_.msg3.b;
  for (int e = 0; e < e_count; ++e) {
    if (!mask_[e]) t->msg.col(e).setZero();
  }

  t->x.middleRows(0, nu).setZero();
  for (int e = 0; e < e_count; ++e) {
    t->x.col(batch_.edge_dst[e]).segment(0, nu) += t->msg.col(e);
  }

  const int h = hp_.n_h1;
  const Matrix gi = (p_.gru_wi * t->x).colwise() + p_.gru_bi;
  const Matrix gh = (p_.gru_wh * g_).colwise() + p_.gru_bh;
  t->g_prev = g_;
  t->r = sigmoid_mat(gi.middleRows(0, h) + gh.middleRows(0, h));
  t->z = sigmoid_mat(gi.middleRows(h, h) + gh.middleRows(h, h));
  t->hh_n = gh.middleRows(2 * h, h);
  t->n = (gi.middleRows(2 * h, h) + t->r.cwiseProduct(t->hh_n))
             .array()
             .tanh()
             .matrix();
  t->g_new = (Matrix::Ones(h, t->n.cols()) - t->z).cwiseProduct(t->n) +
             t->z.cwiseProduct(g_);
  g_ = t->g_new;
  u_ = (p_.out.w * g_).colwise() + p_.out.b;
  t->u_out = u_;
}

const Matrix& GnnCore::layer_forward(const Matrix& node_attrs) {
  const int c = batch_.n_node_cols();
  if (node_attrs.rows() != 2 || node_attrs.cols() != c) {
    throw InvalidLength("node attributes must be 2 x node columns");
  }
  if (u_.size() == 0) throw Error("layer_forward before begin");
  LayerTape layer;
  layer.rounds.resize(hp_.rounds);
  for (int l = 0; l < hp_.rounds; ++l) {
    RoundTape& t = layer.rounds[l];
    t.x.resize(hp_.n_u + 2, c);
    t.x.middleRows(hp_.n_u, 2) = node_attrs;
    run_round(&t);
  }
  layer.r1 = relu((p_.read1.w * u_).colwise() + p_.read1.b);
  layer.r2 = relu((p_.read2.w * layer.r1).colwise() + p_.read2.b);
  layer.logits = (p_.read3.w * layer.r2).colwise() + p_.read3.b;
  layers_.push_back(std::move(layer));
  return layers_.back().logits;
}

void GnnCore::backward(const Matrix& d_last_logits, GnnParameters* grads) const {
  if (layers_.empty()) throw Error("backward before any forward layer");
  const int c = batch_.n_node_cols();
  const int nu = hp_.n_u;
  const int h = hp_.n_h1;
  const int e_count = batch_.n_edges();
  const LayerTape& last = layers_.back();
  if (d_last_logits.rows() != last.logits.rows() || d_last_logits.cols() != c) {
    throw InvalidLength("logit gradient shape mismatch");
  }

  Matrix du = Matrix::Zero(nu, c);
  Matrix dg = Matrix::Zero(h, c);

  for (int li = static_cast<int>(layers_.size()) - 1; li >= 0; --li) {
    const LayerTape& layer = layers_[li];
    if (li + 1 == static_cast<int>(layers_.size())) {
      const Matrix& dz = d_last_logits;
      grads->read3.w += dz * layer.r2.transpose();
      grads->read3.b += dz.rowwise().sum();
      Matrix dr2 = p_.read3.w.transpose() * dz;
      relu_backward(layer.r2, &dr2);
      grads->read2.w += dr2 * layer.r1.transpose();
      grads->read2.b += dr2.rowwise().sum();
      Matrix dr1 = p_.read2.w.transpose() * dr2;
      relu_backward(layer.r1, &dr1);
      grads->read1.w += dr1 * layer.rounds.back().u_out.transpose();
      grads->read1.b += dr1.rowwise().sum();
      du += p_.read1.w.transpose() * dr1;
    }
    for (int l = hp_.rounds - 1; l >= 0; --l) {
      const RoundTape& t = layer.rounds[l];
      // u_out = out.w * g_new + out.b
      grads->out.w += du * t.g_new.transpose();
      grads->out.b += du.rowwise().sum();
      dg += p_.out.w.transpose() * du;

      // GRU: g_new = (1-z).n + z.g_prev
      const Matrix dz_gate = dg.cwiseProduct(t.g_prev - t.n);
      Matrix dn = dg.cwiseProduct(
          (Matrix::Ones(h, c) - t.z));
      Matrix dg_prev = dg.cwiseProduct(t.z);
      Matrix dn_pre =
          dn.cwiseProduct((Matrix::Ones(h, c) - t.n.cwiseProduct(t.n)));
      const Matrix dr = dn_pre.cwiseProduct(t.hh_n);
      const Matrix dr_pre = dr.cwiseProduct(
          t.r.cwiseProduct(Matrix::Ones(h, c) - t.r));
      const Matrix dz_pre = dz_gate.cwiseProduct(
          t.z.cwiseProduct(Matrix::Ones(h, c) - t.z));
      Matrix gi_grad(3 * h, c), gh_grad(3 * h, c);
      gi_grad.middleRows(0, h) = dr_pre;
      gi_grad.middleRows(h, h) = dz_pre;
      gi_grad.middleRows(2 * h, h) = dn_pre;
      gh_grad.middleRows(0, h) = dr_pre;
      gh_grad.middleRows(h, h) = dz_pre;
      gh_grad.middleRows(2 * h, h) = dn_pre.cwiseProduct(t.r);
      grads->gru_wi += gi_grad * t.x.transpose();
      grads->gru_bi += gi_grad.rowwise().sum();
      grads->gru_wh += gh_grad * t.g_prev.transpose();
      grads->gru_bh += gh_grad.rowwise().sum();
      const Matrix dx = p_.gru_wi.transpose() * gi_grad;
      dg_prev += p_.gru_wh.transpose() * gh_grad;

      // Aggregation: attribute rows of x are external constants.
      Matrix dmsg = Matrix::Zero(nu, e_count);
      for (int e = 0; e < e_count; ++e) {
        if (t.mask[e]) {
          dmsg.col(e) = dx.col(batch_.edge_dst[e]).segment(0, nu);
        }
      }
      grads->msg3.w += dmsg * t.h2.transpose();
      grads->msg3.b += dmsg.rowwise().sum();
      Matrix dh2 = p_.msg3.w.transpose() * dmsg;
      relu_backward(t.h2, &dh2);
      grads->msg2.w += dh2 * t.h1.transpose();
      grads->msg2.b += dh2.rowwise().sum();
      Matrix dh1 = p_.msg2.w.transpose() * dh2;
      relu_backward(t.h1, &dh1);
      Matrix edge_in(2 * nu + 2, e_count);
      for (int e = 0; e < e_count; ++e) {
        edge_in.col(e).segment(0, nu) = t.u_in.col(batch_.edge_dst[e]);
        edge_in.col(e).segment(nu, nu) = t.u_in.col(batch_.edge_src[e]);
        edge_in.col(e).tail(2) = batch_.edge_feat.col(e);
      }
      grads->msg1.w += dh1 * edge_in.transpose();
      grads->msg1.b += dh1.rowwise().sum();
      const Matrix dedge = p_.msg1.w.transpose() * dh1;
      Matrix du_prev = Matrix::Zero(nu, c);
      for (int e = 0; e < e_count; ++e) {
        du_prev.col(batch_.edge_dst[e]) += dedge.col(e).segment(0, nu);
        du_prev.col(batch_.edge_src[e]) += dedge.col(e).segment(nu, nu);
      }
      du = du_prev;
      dg = dg_prev;
    }
  }
  // u at the very start came from the embedding; g started at zero.
  grads->embed.w += du * batch_.node_init.transpose();
  grads->embed.b += du.rowwise().sum();
}

Matrix softmax_columns(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const Vector shifted =
        logits.col(c).array() - logits.col(c).maxCoeff();
    const Vector e = shifted.array().exp();
    out.col(c) = e / e.sum();
  }
  return out;
}

}  // namespace gep
