#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "slg/embedding_table.hpp"
#include "slg/synthgen.hpp"
#include "slg/types.hpp"

namespace slg::seq {

inline constexpr std::size_t kSeqLen = 20;

/// Fixed-length model input. Real events sit at the end; padding is on the left.
struct EncodedSequence {
  std::vector<int> page_ids;
  std::vector<int> categories;
  std::vector<double> dwell_ms;
  std::vector<bool> mask;  // true = real event
  int target_page = synth::kPadToken;

  std::size_t length() const noexcept { return page_ids.size(); }
  std::size_t real_count() const;
  bool operator==(const EncodedSequence&) const = default;
};

/// Holds out the last event as the target and keeps the most recent `length`
/// events before it. Returns nullopt for sequences with fewer than 2 events.
std::optional<EncodedSequence> encode(const synth::BehaviorSequence& seq, std::size_t length = kSeqLen);

struct SeqHyper {
  std::size_t page_vocab = 40;    // includes PAD
  std::size_t n_categories = 12;  // includes PAD
  std::size_t d_tok = 16;
  std::size_t d_h = 64;
  std::size_t d_att = 32;
  std::size_t d_b = 64;
  bool use_category = true;
  double lr = 1e-3;
  std::size_t batch = 256;
  std::size_t epochs = 5;
  std::uint64_t seed = 7;

  std::size_t input_dim() const noexcept { return d_tok * (use_category ? 2 : 1) + 1; }
  void validate() const;
};

/// Gate blocks in w_x, w_h and b_lstm are ordered input, forget, cell, output.
struct SeqModelParams {
  SeqHyper hyper;
  Matrix page_embed;  // page_vocab x d_tok
  Matrix cat_embed;   // n_categories x d_tok (0 x d_tok when categories are off)
  Matrix w_x;         // input_dim x 4 d_h
  Matrix w_h;         // d_h x 4 d_h
  Matrix b_lstm;      // 1 x 4 d_h
  Matrix w_att;       // (d_h + 1) x d_att, last row scores log1p(dwell)
  Matrix b_att;       // 1 x d_att
  Matrix v_att;       // d_att x 1
  Matrix w_emb;       // d_h x d_b
  Matrix b_emb;       // 1 x d_b
  Matrix w_out;       // d_b x page_vocab
  Matrix b_out;       // 1 x page_vocab

  std::vector<std::pair<std::string, Matrix*>> tensors();
  std::vector<std::pair<std::string, const Matrix*>> tensors() const;
  /// Same shapes, all zeros.
  SeqModelParams zeros_like() const;
  bool all_finite() const;
  bool operator==(const SeqModelParams& o) const;
};

SeqModelParams init_params(const SeqHyper& hyper);

struct ForwardOutput {
  Matrix logits;     // B x page_vocab
  Matrix embedding;  // B x d_b
  Matrix attention;  // B x L, zero on padding
};

/// Batched forward pass. Masked steps carry the recurrent state through
/// unchanged. Throws ContractViolation on an all-padding row.
ForwardOutput forward(const SeqModelParams& params, const std::vector<EncodedSequence>& batch);

/// Mean softmax cross-entropy.
double nll_loss(const Matrix& logits, const std::vector<int>& targets);

/// Mean loss over the batch; accumulates its gradient into `grad` when given.
double loss_and_grad(const SeqModelParams& params, const std::vector<EncodedSequence>& batch,
                     SeqModelParams* grad);

/// Share of sequences whose highest logit is the target page.
double next_page_accuracy(const SeqModelParams& params, const std::vector<EncodedSequence>& seqs);

struct TrainResult {
  SeqModelParams params;
  std::vector<double> batch_losses;
  std::vector<double> epoch_losses;  // mean batch loss per epoch
  bool diverged = false;             // params then hold the last finite state
  std::string diagnostic;
};

/// Adam over shuffled minibatches. Single-threaded and deterministic in the seed.
TrainResult train(const std::vector<EncodedSequence>& seqs, const SeqHyper& hyper);

struct EmbedResult {
  EmbeddingTable table;
  std::vector<TxnId> skipped;  // fewer than 2 events
};

/// One embedding per encodable transaction in dataset order. Each row is
/// computed on its own, so results do not depend on batching or threads.
EmbedResult embed_all(const SeqModelParams& params, const synth::Dataset& dataset);

void save_checkpoint(const SeqModelParams& params, const std::filesystem::path& path);
SeqModelParams load_checkpoint(const std::filesystem::path& path);

inline constexpr const char* kEmbeddingsFile = "embeddings.csv";
inline constexpr const char* kCheckpointFile = "seq_model.bin";

}  // namespace slg::seq
