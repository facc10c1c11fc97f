#ifndef UDPARSE_BILM_H_
#define UDPARSE_BILM_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "udparse/autodiff.h"
#include "udparse/nn.h"
#include "udparse/params.h"
#include "udparse/vocab.h"

namespace udparse {

// Which contextual representation a downstream model consumes.
enum class LmMode {
  kNone,
  kLayer0,  // the character-CNN token vector, duplicated to both directions
  kSum012,  // unweighted sum of the token layer and both LSTM layers
};

LmMode ParseLmMode(const std::string& name);
std::string LmModeName(LmMode mode);

struct BiLmConfig {
  size_t char_dim = 16;
  std::vector<size_t> filter_widths = {1, 2, 3};
  size_t filters_per_width = 32;
  size_t hidden = 64;  // per direction; also the token-vector width
  size_t layers = 2;
  size_t max_word_chars = 30;
  // With sampled_softmax each prediction normalizes over `window` output
  // words surrounding the target's frequency rank instead of the full
  // vocabulary.
  bool sampled_softmax = false;
  size_t window = 8192;
  size_t epochs = 10;
  size_t batch_size = 16;
  double learning_rate = 5e-3;
  double clip_norm = 5.0;
  uint64_t seed = 1;
  bool verbose = false;
};

// Character-aware bidirectional language model. Forward and backward LSTM
// stacks are independent and share the token encoder and output softmax.
class BiLmModel {
 public:
  BiLmModel() = default;
  BiLmModel(BiLmModel&&) = default;
  BiLmModel& operator=(BiLmModel&&) = default;

  // Output vocabulary is ordered <unk>, <s>, </s>, then corpus words by
  // descending frequency (ties by first occurrence).
  static BiLmModel Create(const std::vector<std::vector<std::string>>& corpus,
                          const BiLmConfig& config);

  const BiLmConfig& config() const { return config_; }
  const Vocab& words() const { return words_; }
  const Vocab& chars() const { return chars_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  size_t hidden() const { return config_.hidden; }
  size_t layers() const { return config_.layers; }
  // Width of contextualized vectors (both directions).
  size_t output_dim() const { return 2 * config_.hidden; }

  struct States {
    Var tokens;                 // m x H
    std::vector<Var> forward;   // per layer, m x H
    std::vector<Var> backward;  // per layer, m x H
  };
  // Runs over <s> w_1 ... w_n </s>.
  States Run(Tape& tape, const std::vector<std::string>& sentence) const;

  // Summed negative log-likelihood of the forward and backward predictions,
  // and the number of predictions made. `window` 0 uses the full softmax.
  Var Loss(Tape& tape, const std::vector<std::string>& sentence, size_t window,
           size_t* predictions = nullptr) const;

  // Contextual vectors for the words of `sentence` (n x output_dim()).
  // Never touches gradients.
  Tensor Contextualize(const std::vector<std::string>& sentence, LmMode mode) const;
  // All layers for each word: layer j row i is h_{i,j} (n x 2H).
  std::vector<Tensor> LayerStates(const std::vector<std::string>& sentence) const;

  // Forward-direction perplexity over the words of `corpus` (the end of
  // sentence event is excluded).
  double Perplexity(const std::vector<std::vector<std::string>>& corpus) const;

  void Save(const std::string& dir) const;
  static BiLmModel Load(const std::string& dir);

  static constexpr int kFormatVersion = 1;

 private:
  void Build(Rng& rng);
  void Bind();
  std::vector<size_t> CharIds(const std::string& word) const;
  size_t OutputId(const std::string& word) const;

  BiLmConfig config_;
  Vocab words_;
  Vocab chars_;
  ParameterSet params_;
  Parameter* char_table_ = nullptr;
  std::vector<Parameter*> conv_filters_;
  std::vector<Parameter*> conv_biases_;
  nn::Dense token_projection_;
  std::vector<nn::Lstm> forward_;
  std::vector<nn::Lstm> backward_;
  Parameter* softmax_weight_ = nullptr;  // V x H
  Parameter* softmax_bias_ = nullptr;    // 1 x V
};

// Trains with Adam on the joint forward + backward objective.
BiLmModel TrainBiLm(const std::vector<std::vector<std::string>>& corpus,
                    const BiLmConfig& config);

inline constexpr const char* kBos = "<s>";
inline constexpr const char* kEos = "</s>";
inline constexpr const char* kUnk = "<unk>";

}  // namespace udparse

#endif  // UDPARSE_BILM_H_
