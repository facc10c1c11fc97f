#ifndef UDPARSE_PARAMS_H_
#define UDPARSE_PARAMS_H_

#include <cstddef>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "udparse/rng.h"
#include "udparse/tensor.h"

namespace udparse {

// A named model tensor with its gradient accumulator and Adam moments.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor first_moment;
  Tensor second_moment;
  bool trainable = true;

  Parameter(std::string n, Tensor v, bool train);
};

enum class Init {
  kZeros,
  kXavier,      // uniform, fan computed from the last two extents
  kOrthogonal,  // per square block along the first axis
  kNormal,      // N(0, 1/sqrt(cols))
};

// Owns the parameters of one model. Parameter addresses stay stable for the
// lifetime of the set (including across moves of the set).
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;
  ParameterSet(ParameterSet&&) = default;
  ParameterSet& operator=(ParameterSet&&) = default;

  Parameter& Add(const std::string& name, std::vector<size_t> shape, Init init,
                 Rng& rng, bool trainable = true);
  Parameter& Add(const std::string& name, Tensor value, bool trainable);

  Parameter* Find(const std::string& name);
  const Parameter* Find(const std::string& name) const;
  Parameter& Get(const std::string& name);
  const Parameter& Get(const std::string& name) const;

  size_t size() const { return params_.size(); }
  std::vector<Parameter*> All();
  std::vector<const Parameter*> All() const;

  size_t CountValues(bool trainable_only) const;
  void ZeroGrad();

  // Copies values of every parameter (best-model snapshots).
  std::vector<Tensor> Snapshot() const;
  void Restore(const std::vector<Tensor>& snapshot);

  // Container format:
  //   udparse-params <version>
  //   count <n>
  //   then per parameter:
  //   param <name> <trainable 0|1> <rank> <extent>...
  //   <values as hex floats, space separated, one line>
  void Save(std::ostream& out) const;
  // Loads values into already-declared parameters; shapes must agree and every
  // declared parameter must be present.
  void Load(std::istream& in);
  // Reads a container into a fresh set.
  static ParameterSet ReadAll(std::istream& in);

  static constexpr int kFormatVersion = 1;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, size_t> index_;
};

void InitializeTensor(Tensor& t, Init init, Rng& rng);

struct AdamConfig {
  double learning_rate = 2e-3;
  double beta1 = 0.9;
  double beta2 = 0.9;
  double epsilon = 1e-8;
  double clip_norm = 5.0;  // global gradient norm; <= 0 disables clipping
};

// Adam with bias correction. Gradients of all parameters are zeroed after the
// update; non-trainable parameters are never modified.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}
  void Step(ParameterSet& params);
  void Step(const std::vector<Parameter*>& params);
  size_t steps() const { return step_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  size_t step_ = 0;
};

double GlobalGradNorm(const std::vector<Parameter*>& params);

}  // namespace udparse

#endif  // UDPARSE_PARAMS_H_
