#include "slg/seqembed.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "slg/error.hpp"
#include "slg/parallel.hpp"
#include "slg/rng.hpp"

namespace slg::seq {

std::size_t EncodedSequence::real_count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
}

std::optional<EncodedSequence> encode(const synth::BehaviorSequence& seq, std::size_t length) {
  if (length == 0) throw ContractViolation("encode: length must be positive");
  if (seq.size() < 2) return std::nullopt;
  EncodedSequence e;
  e.page_ids.assign(length, synth::kPadToken);
  e.categories.assign(length, synth::kPadToken);
  e.dwell_ms.assign(length, 0.0);
  e.mask.assign(length, false);
  e.target_page = seq.back().page_id;
  const std::size_t inputs = seq.size() - 1;
  const std::size_t keep = std::min(inputs, length);
  const std::size_t first = inputs - keep;
  const std::size_t offset = length - keep;
  for (std::size_t i = 0; i < keep; ++i) {
    const auto& ev = seq[first + i];
    e.page_ids[offset + i] = ev.page_id;
    e.categories[offset + i] = ev.category;
    e.dwell_ms[offset + i] = ev.dwell_ms;
    e.mask[offset + i] = true;
  }
  return e;
}

void SeqHyper::validate() const {
  if (page_vocab < 3) throw ConfigError("seqembed.page_vocab must be >= 3");
  if (use_category && n_categories < 2) throw ConfigError("seqembed.n_categories must be >= 2");
  if (d_tok == 0 || d_h == 0 || d_att == 0 || d_b == 0) throw ConfigError("seqembed dimensions must be positive");
  if (!(lr > 0.0)) throw ConfigError("seqembed.lr must be positive");
  if (batch == 0) throw ConfigError("seqembed.batch must be positive");
}

std::vector<std::pair<std::string, Matrix*>> SeqModelParams::tensors() {
  return {{"page_embed", &page_embed}, {"cat_embed", &cat_embed}, {"w_x", &w_x},     {"w_h", &w_h},
          {"b_lstm", &b_lstm},         {"w_att", &w_att},         {"b_att", &b_att}, {"v_att", &v_att},
          {"w_emb", &w_emb},           {"b_emb", &b_emb},         {"w_out", &w_out}, {"b_out", &b_out}};
}

std::vector<std::pair<std::string, const Matrix*>> SeqModelParams::tensors() const {
  auto& self = const_cast<SeqModelParams&>(*this);
  std::vector<std::pair<std::string, const Matrix*>> out;
  for (auto& [name, m] : self.tensors()) out.emplace_back(name, m);
  return out;
}

SeqModelParams SeqModelParams::zeros_like() const {
  SeqModelParams z = *this;
  for (auto& [name, m] : z.tensors()) m->setZero();
  return z;
}

bool SeqModelParams::all_finite() const {
  for (const auto& [name, m] : tensors())
    if (!m->allFinite()) return false;
  return true;
}

bool SeqModelParams::operator==(const SeqModelParams& o) const {
  auto a = tensors();
  auto b = o.tensors();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Matrix& x = *a[i].second;
    const Matrix& y = *b[i].second;
    if (x.rows() != y.rows() || x.cols() != y.cols()) return false;
    if (std::memcmp(x.data(), y.data(), sizeof(double) * static_cast<std::size_t>(x.size())) != 0) return false;
  }
  return true;
}

namespace {

using Idx = Eigen::Index;

Idx ix(std::size_t v) { return static_cast<Idx>(v); }

void fill_uniform(Matrix& m, Rng& rng, double scale) {
  for (Idx i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
}

double glorot(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace

constexpr double kDwellInitScale = 0.1;

SeqModelParams init_params(const SeqHyper& h) {
  h.validate();
  Rng rng(derive_seed(h.seed, 0x5e91));
  SeqModelParams p;
  p.hyper = h;
  const std::size_t in = h.input_dim();
  p.page_embed = Matrix(ix(h.page_vocab), ix(h.d_tok));
  fill_uniform(p.page_embed, rng, 1.0);
  p.cat_embed = Matrix(ix(h.use_category ? h.n_categories : 0), ix(h.d_tok));
  fill_uniform(p.cat_embed, rng, 1.0);
  p.w_x = Matrix(ix(in), ix(4 * h.d_h));
  fill_uniform(p.w_x, rng, glorot(in, h.d_h));
  p.w_x.row(ix(in - 1)) *= kDwellInitScale;  // log1p(dwell) is an order of magnitude above embedding entries
  p.w_h = Matrix(ix(h.d_h), ix(4 * h.d_h));
  fill_uniform(p.w_h, rng, glorot(h.d_h, h.d_h));
  p.b_lstm = Matrix::Zero(1, ix(4 * h.d_h));
  p.b_lstm.middleCols(ix(h.d_h), ix(h.d_h)).setOnes();
  p.w_att = Matrix(ix(h.d_h + 1), ix(h.d_att));
  fill_uniform(p.w_att, rng, glorot(h.d_h + 1, h.d_att));
  p.w_att.row(ix(h.d_h)) *= kDwellInitScale;
  p.b_att = Matrix::Zero(1, ix(h.d_att));
  p.v_att = Matrix(ix(h.d_att), 1);
  fill_uniform(p.v_att, rng, glorot(h.d_att, 1));
  p.w_emb = Matrix(ix(h.d_h), ix(h.d_b));
  fill_uniform(p.w_emb, rng, glorot(h.d_h, h.d_b));
  p.b_emb = Matrix::Zero(1, ix(h.d_b));
  p.w_out = Matrix(ix(h.d_b), ix(h.page_vocab));
  fill_uniform(p.w_out, rng, glorot(h.d_b, h.page_vocab));
  p.b_out = Matrix::Zero(1, ix(h.page_vocab));
  return p;
}

namespace {

struct Cache {
  std::size_t B = 0, L = 0;
  std::vector<Matrix> x;           // per step, B x input_dim
  std::vector<Matrix> h, c;        // L + 1 states, index 0 is the zero state
  std::vector<Matrix> gi, gf, gg, go;
  std::vector<Matrix> u;           // attention hidden, B x d_att
  Matrix tau;                      // B x L
  std::vector<std::vector<bool>> mask;
  Matrix alpha;                    // B x L
  Matrix ctx, emb, logits;
};

Matrix sigmoid(const Matrix& z) { return (1.0 / (1.0 + (-z.array()).exp())).matrix(); }

void check_token(int v, std::size_t vocab, const char* what) {
  if (v < 0 || static_cast<std::size_t>(v) >= vocab)
    throw ContractViolation(std::string("seqembed: ") + what + " token out of vocabulary");
}

void run_forward(const SeqModelParams& p, const std::vector<EncodedSequence>& batch, Cache& k) {
  const auto& hy = p.hyper;
  const std::size_t B = batch.size();
  if (B == 0) throw ContractViolation("seqembed forward: empty batch");
  const std::size_t L = batch.front().length();
  const std::size_t dt = hy.d_tok, dh = hy.d_h, in = hy.input_dim();
  k.B = B;
  k.L = L;
  k.tau = Matrix::Zero(ix(B), ix(L));
  k.mask.assign(B, {});
  for (std::size_t b = 0; b < B; ++b) {
    const auto& e = batch[b];
    if (e.length() != L) throw ContractViolation("seqembed forward: mixed sequence lengths in batch");
    if (e.real_count() == 0) throw ContractViolation("seqembed forward: sequence has no real events");
    check_token(e.target_page, hy.page_vocab, "target");
    k.mask[b] = e.mask;
    for (std::size_t t = 0; t < L; ++t) k.tau(ix(b), ix(t)) = std::log1p(e.dwell_ms[t]);
  }
  k.x.assign(L, Matrix());
  k.h.assign(L + 1, Matrix::Zero(ix(B), ix(dh)));
  k.c.assign(L + 1, Matrix::Zero(ix(B), ix(dh)));
  k.gi.assign(L, Matrix());
  k.gf.assign(L, Matrix());
  k.gg.assign(L, Matrix());
  k.go.assign(L, Matrix());
  k.u.assign(L, Matrix());
  Matrix scores(ix(B), ix(L));
  for (std::size_t t = 0; t < L; ++t) {
    Matrix& x = k.x[t];
    x = Matrix::Zero(ix(B), ix(in));
    for (std::size_t b = 0; b < B; ++b) {
      const auto& e = batch[b];
      if (!e.mask[t]) continue;
      check_token(e.page_ids[t], hy.page_vocab, "page");
      x.row(ix(b)).head(ix(dt)) = p.page_embed.row(e.page_ids[t]);
      if (hy.use_category) {
        check_token(e.categories[t], hy.n_categories, "category");
        x.row(ix(b)).segment(ix(dt), ix(dt)) = p.cat_embed.row(e.categories[t]);
      }
      x(ix(b), ix(in - 1)) = k.tau(ix(b), ix(t));
    }
    Matrix g = x * p.w_x;
    g.noalias() += k.h[t] * p.w_h;
    g.rowwise() += p.b_lstm.row(0);
    k.gi[t] = sigmoid(g.leftCols(ix(dh)));
    k.gf[t] = sigmoid(g.middleCols(ix(dh), ix(dh)));
    k.gg[t] = g.middleCols(ix(2 * dh), ix(dh)).array().tanh().matrix();
    k.go[t] = sigmoid(g.rightCols(ix(dh)));
    k.c[t + 1] = (k.gf[t].array() * k.c[t].array() + k.gi[t].array() * k.gg[t].array()).matrix();
    k.h[t + 1] = (k.go[t].array() * k.c[t + 1].array().tanh()).matrix();
    for (std::size_t b = 0; b < B; ++b) {
      if (k.mask[b][t]) continue;
      k.c[t + 1].row(ix(b)) = k.c[t].row(ix(b));
      k.h[t + 1].row(ix(b)) = k.h[t].row(ix(b));
    }
    Matrix pre = k.h[t + 1] * p.w_att.topRows(ix(dh));
    pre.noalias() += k.tau.col(ix(t)) * p.w_att.bottomRows(1);
    pre.rowwise() += p.b_att.row(0);
    k.u[t] = pre.array().tanh().matrix();
    scores.col(ix(t)) = k.u[t] * p.v_att;
  }
  k.alpha = Matrix::Zero(ix(B), ix(L));
  for (std::size_t b = 0; b < B; ++b) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < L; ++t)
      if (k.mask[b][t]) mx = std::max(mx, scores(ix(b), ix(t)));
    double sum = 0.0;
    for (std::size_t t = 0; t < L; ++t) {
      if (!k.mask[b][t]) continue;
      const double w = std::exp(scores(ix(b), ix(t)) - mx);
      k.alpha(ix(b), ix(t)) = w;
      sum += w;
    }
    k.alpha.row(ix(b)) /= sum;
  }
  k.ctx = Matrix::Zero(ix(B), ix(dh));
  for (std::size_t t = 0; t < L; ++t)
    k.ctx += (k.h[t + 1].array().colwise() * k.alpha.col(ix(t)).array()).matrix();
  Matrix pre_e = k.ctx * p.w_emb;
  pre_e.rowwise() += p.b_emb.row(0);
  k.emb = pre_e.array().tanh().matrix();
  k.logits = k.emb * p.w_out;
  k.logits.rowwise() += p.b_out.row(0);
}

// Row-wise log-sum-exp.
double log_sum_exp(const Matrix& m, Idx row) {
  const double mx = m.row(row).maxCoeff();
  double s = 0.0;
  for (Idx j = 0; j < m.cols(); ++j) s += std::exp(m(row, j) - mx);
  return mx + std::log(s);
}

}  // namespace

ForwardOutput forward(const SeqModelParams& params, const std::vector<EncodedSequence>& batch) {
  Cache k;
  run_forward(params, batch, k);
  return {std::move(k.logits), std::move(k.emb), std::move(k.alpha)};
}

double nll_loss(const Matrix& logits, const std::vector<int>& targets) {
  if (static_cast<std::size_t>(logits.rows()) != targets.size())
    throw ContractViolation("nll_loss: logits and targets disagree in size");
  if (targets.empty()) return 0.0;
  double total = 0.0;
  for (Idx b = 0; b < logits.rows(); ++b) {
    const int y = targets[static_cast<std::size_t>(b)];
    if (y == synth::kPadToken || y < 0 || y >= logits.cols()) throw ContractViolation("nll_loss: invalid target");
    total += log_sum_exp(logits, b) - logits(b, y);
  }
  return total / static_cast<double>(logits.rows());
}

double loss_and_grad(const SeqModelParams& p, const std::vector<EncodedSequence>& batch, SeqModelParams* grad) {
  Cache k;
  run_forward(p, batch, k);
  std::vector<int> targets(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) targets[b] = batch[b].target_page;
  const double loss = nll_loss(k.logits, targets);
  if (grad == nullptr) return loss;

  const auto& hy = p.hyper;
  const std::size_t B = k.B, L = k.L, dt = hy.d_tok, dh = hy.d_h;
  const double inv_b = 1.0 / static_cast<double>(B);
  SeqModelParams& g = *grad;

  Matrix dlogits(k.logits.rows(), k.logits.cols());
  for (Idx b = 0; b < k.logits.rows(); ++b) {
    const double lse = log_sum_exp(k.logits, b);
    for (Idx j = 0; j < k.logits.cols(); ++j) dlogits(b, j) = std::exp(k.logits(b, j) - lse) * inv_b;
    dlogits(b, targets[static_cast<std::size_t>(b)]) -= inv_b;
  }
  g.w_out.noalias() += k.emb.transpose() * dlogits;
  g.b_out += dlogits.colwise().sum();
  Matrix dpre_e = ((dlogits * p.w_out.transpose()).array() * (1.0 - k.emb.array().square())).matrix();
  g.w_emb.noalias() += k.ctx.transpose() * dpre_e;
  g.b_emb += dpre_e.colwise().sum();
  const Matrix dctx = dpre_e * p.w_emb.transpose();

  // Attention.
  Matrix dalpha(ix(B), ix(L));
  for (std::size_t t = 0; t < L; ++t) dalpha.col(ix(t)) = (dctx.array() * k.h[t + 1].array()).rowwise().sum();
  Matrix ds = Matrix::Zero(ix(B), ix(L));
  for (std::size_t b = 0; b < B; ++b) {
    const double mean = k.alpha.row(ix(b)).dot(dalpha.row(ix(b)));
    for (std::size_t t = 0; t < L; ++t)
      if (k.mask[b][t]) ds(ix(b), ix(t)) = k.alpha(ix(b), ix(t)) * (dalpha(ix(b), ix(t)) - mean);
  }
  std::vector<Matrix> dh_ext(L);
  for (std::size_t t = 0; t < L; ++t) {
    const Matrix ds_t = ds.col(ix(t));
    g.v_att.noalias() += k.u[t].transpose() * ds_t;
    const Matrix dpre = ((ds_t * p.v_att.transpose()).array() * (1.0 - k.u[t].array().square())).matrix();
    g.w_att.topRows(ix(dh)).noalias() += k.h[t + 1].transpose() * dpre;
    g.w_att.bottomRows(1).noalias() += k.tau.col(ix(t)).transpose() * dpre;
    g.b_att += dpre.colwise().sum();
    dh_ext[t] = (dctx.array().colwise() * k.alpha.col(ix(t)).array()).matrix();
    dh_ext[t].noalias() += dpre * p.w_att.topRows(ix(dh)).transpose();
  }

  // Recurrence, newest step first.
  Matrix dh_next = Matrix::Zero(ix(B), ix(dh));
  Matrix dc_next = Matrix::Zero(ix(B), ix(dh));
  Matrix dgates(ix(B), ix(4 * dh));
  for (std::size_t step = L; step-- > 0;) {
    const Matrix dh_t = dh_ext[step] + dh_next;
    const Eigen::ArrayXXd tc = k.c[step + 1].array().tanh();
    const Eigen::ArrayXXd dc = dc_next.array() + dh_t.array() * k.go[step].array() * (1.0 - tc.square());
    const Eigen::ArrayXXd i = k.gi[step].array(), f = k.gf[step].array(), gg = k.gg[step].array(),
                          o = k.go[step].array();
    dgates.leftCols(ix(dh)) = (dc * gg * i * (1.0 - i)).matrix();
    dgates.middleCols(ix(dh), ix(dh)) = (dc * k.c[step].array() * f * (1.0 - f)).matrix();
    dgates.middleCols(ix(2 * dh), ix(dh)) = (dc * i * (1.0 - gg.square())).matrix();
    dgates.rightCols(ix(dh)) = (dh_t.array() * tc * o * (1.0 - o)).matrix();
    Matrix dc_prev = (dc * f).matrix();
    for (std::size_t b = 0; b < B; ++b) {
      if (k.mask[b][step]) continue;
      dgates.row(ix(b)).setZero();
      dc_prev.row(ix(b)) = dc_next.row(ix(b));
    }
    g.w_x.noalias() += k.x[step].transpose() * dgates;
    g.w_h.noalias() += k.h[step].transpose() * dgates;
    g.b_lstm += dgates.colwise().sum();
    const Matrix dx = dgates * p.w_x.transpose();
    dh_next = dgates * p.w_h.transpose();
    for (std::size_t b = 0; b < B; ++b) {
      if (!k.mask[b][step]) {
        dh_next.row(ix(b)) = dh_t.row(ix(b));
        continue;
      }
      const auto& e = batch[b];
      g.page_embed.row(e.page_ids[step]) += dx.row(ix(b)).head(ix(dt));
      if (hy.use_category) g.cat_embed.row(e.categories[step]) += dx.row(ix(b)).segment(ix(dt), ix(dt));
    }
    dc_next = std::move(dc_prev);
  }
  return loss;
}

double next_page_accuracy(const SeqModelParams& params, const std::vector<EncodedSequence>& seqs) {
  if (seqs.empty()) return 0.0;
  std::size_t hits = 0;
  const std::size_t bs = std::max<std::size_t>(1, params.hyper.batch);
  for (std::size_t s = 0; s < seqs.size(); s += bs) {
    std::vector<EncodedSequence> batch(seqs.begin() + static_cast<std::ptrdiff_t>(s),
                                       seqs.begin() + static_cast<std::ptrdiff_t>(std::min(seqs.size(), s + bs)));
    const auto out = forward(params, batch);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      Idx arg = 0;
      out.logits.row(ix(b)).maxCoeff(&arg);
      hits += arg == batch[b].target_page;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(seqs.size());
}

TrainResult train(const std::vector<EncodedSequence>& seqs, const SeqHyper& hyper) {
  if (seqs.empty()) throw ConfigError("seqembed.train: no encodable sequences");
  TrainResult r;
  r.params = init_params(hyper);
  SeqModelParams m1 = r.params.zeros_like(), m2 = r.params.zeros_like();
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  std::vector<std::size_t> order(seqs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < hyper.epochs && !r.diverged; ++epoch) {
    Rng rng(derive_seed(hyper.seed, 0xe90c, epoch));
    rng.shuffle(order.begin(), order.end());
    double epoch_sum = 0.0;
    std::size_t epoch_batches = 0;
    for (std::size_t s = 0; s < order.size(); s += hyper.batch) {
      std::vector<EncodedSequence> batch;
      for (std::size_t i = s; i < std::min(order.size(), s + hyper.batch); ++i) batch.push_back(seqs[order[i]]);
      SeqModelParams grad = r.params.zeros_like();
      const double loss = loss_and_grad(r.params, batch, &grad);
      if (!std::isfinite(loss) || !grad.all_finite()) {
        r.diverged = true;
        r.diagnostic = "non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                       std::to_string(s / hyper.batch);
        break;
      }
      ++step;
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
      auto pt = r.params.tensors();
      auto gt = grad.tensors();
      auto at = m1.tensors();
      auto bt = m2.tensors();
      for (std::size_t j = 0; j < pt.size(); ++j) {
        auto g = gt[j].second->array();
        auto m = at[j].second->array();
        auto v = bt[j].second->array();
        m = kBeta1 * m + (1.0 - kBeta1) * g;
        v = kBeta2 * v + (1.0 - kBeta2) * g.square();
        pt[j].second->array() -= hyper.lr * (m / c1) / ((v / c2).sqrt() + kEps);
      }
      r.batch_losses.push_back(loss);
      epoch_sum += loss;
      ++epoch_batches;
    }
    if (epoch_batches > 0) r.epoch_losses.push_back(epoch_sum / static_cast<double>(epoch_batches));
  }
  return r;
}

EmbedResult embed_all(const SeqModelParams& params, const synth::Dataset& dataset) {
  std::vector<std::size_t> rows;
  std::vector<EncodedSequence> encoded;
  EmbedResult r;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    auto e = encode(dataset.sequences[i]);
    if (!e) {
      r.skipped.push_back(dataset.transactions[i].txn_id);
      continue;
    }
    rows.push_back(i);
    encoded.push_back(std::move(*e));
  }
  Matrix out(ix(rows.size()), ix(params.hyper.d_b));
  parallel_blocks(rows.size(), thread_count(), [&](std::size_t begin, std::size_t end, std::size_t) {
    std::vector<EncodedSequence> one(1);
    for (std::size_t j = begin; j < end; ++j) {
      one[0] = encoded[j];
      out.row(ix(j)) = forward(params, one).embedding.row(0);
    }
  });
  std::vector<TxnId> ids;
  ids.reserve(rows.size());
  for (auto i : rows) ids.push_back(dataset.transactions[i].txn_id);
  r.table = EmbeddingTable(std::move(ids), std::move(out));
  return r;
}

namespace {

constexpr char kMagic[8] = {'S', 'L', 'G', 'S', 'E', 'Q', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::filesystem::path& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw IoError("truncated checkpoint", path.string());
  return v;
}

}  // namespace

// Host byte order; checkpoints are not meant to move between architectures.
void save_checkpoint(const SeqModelParams& params, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing", path.string());
  os.write(kMagic, sizeof kMagic);
  put(os, kVersion);
  const auto& h = params.hyper;
  for (std::uint64_t v : {h.page_vocab, h.n_categories, h.d_tok, h.d_h, h.d_att, h.d_b, h.batch, h.epochs})
    put(os, v);
  put(os, static_cast<std::uint8_t>(h.use_category));
  put(os, h.lr);
  put(os, h.seed);
  const auto ts = params.tensors();
  put(os, static_cast<std::uint32_t>(ts.size()));
  for (const auto& [name, m] : ts) {
    put(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put(os, static_cast<std::uint64_t>(m->rows()));
    put(os, static_cast<std::uint64_t>(m->cols()));
    os.write(reinterpret_cast<const char*>(m->data()), static_cast<std::streamsize>(sizeof(double) * m->size()));
  }
  if (!os) throw IoError("failed writing checkpoint", path.string());
}

SeqModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint", path.string());
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw IoError("not a sequence-model checkpoint", path.string());
  if (get<std::uint32_t>(is, path) != kVersion) throw IoError("unsupported checkpoint version", path.string());
  SeqModelParams p;
  auto& h = p.hyper;
  for (std::size_t* f : {&h.page_vocab, &h.n_categories, &h.d_tok, &h.d_h, &h.d_att, &h.d_b, &h.batch, &h.epochs})
    *f = static_cast<std::size_t>(get<std::uint64_t>(is, path));
  h.use_category = get<std::uint8_t>(is, path) != 0;
  h.lr = get<double>(is, path);
  h.seed = get<std::uint64_t>(is, path);
  auto ts = p.tensors();
  if (get<std::uint32_t>(is, path) != ts.size()) throw IoError("checkpoint tensor count mismatch", path.string());
  for (auto& [name, m] : ts) {
    const auto len = get<std::uint32_t>(is, path);
    std::string stored(len, '\0');
    if (!is.read(stored.data(), len) || stored != name)
      throw IoError("checkpoint tensor '" + name + "' missing", path.string());
    const auto rows = get<std::uint64_t>(is, path);
    const auto cols = get<std::uint64_t>(is, path);
    m->resize(static_cast<Idx>(rows), static_cast<Idx>(cols));
    if (!is.read(reinterpret_cast<char*>(m->data()), static_cast<std::streamsize>(sizeof(double) * m->size())))
      throw IoError("truncated checkpoint", path.string());
  }
  const SeqModelParams ref = init_params(h);
  auto want = ref.tensors();
  for (std::size_t i = 0; i < ts.size(); ++i)
    if (ts[i].second->rows() != want[i].second->rows() || ts[i].second->cols() != want[i].second->cols())
      throw IoError("checkpoint shape manifest disagrees with its hyperparameters", path.string());
  return p;
}

}  // namespace slg::seq
