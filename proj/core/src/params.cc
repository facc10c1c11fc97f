#include "udparse/params.h"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>

#include "udparse/error.h"

namespace udparse {

Parameter::Parameter(std::string n, Tensor v, bool train)
    : name(std::move(n)),
      value(std::move(v)),
      grad(value.shape()),
      first_moment(value.shape()),
      second_moment(value.shape()),
      trainable(train) {}

void InitializeTensor(Tensor& t, Init init, Rng& rng) {
  const size_t cols = t.cols();
  const size_t rows = t.rank() >= 2 ? t.shape()[t.rank() - 2] : 1;
  switch (init) {
    case Init::kZeros:
      t.Fill(0.0);
      return;
    case Init::kXavier: {
      const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
      for (Real& v : t.values()) v = rng.Uniform(-bound, bound);
      return;
    }
    case Init::kNormal: {
      const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
      for (Real& v : t.values()) v = rng.Normal() * scale;
      return;
    }
    case Init::kOrthogonal: {
      // Gram-Schmidt on Gaussian blocks of cols x cols; a trailing partial
      // block keeps orthonormal rows.
      const size_t n = cols;
      const size_t total_rows = t.size() / n;
      for (size_t block = 0; block < total_rows; block += n) {
        const size_t m = std::min(n, total_rows - block);
        for (size_t r = 0; r < m; ++r) {
          std::span<Real> row = t.row(block + r);
          for (;;) {
            for (Real& v : row) v = rng.Normal();
            for (size_t q = 0; q < r; ++q) {
              std::span<const Real> prev = t.row(block + q);
              double dot = 0.0;
              for (size_t k = 0; k < n; ++k) dot += row[k] * prev[k];
              for (size_t k = 0; k < n; ++k) row[k] -= dot * prev[k];
            }
            double norm = 0.0;
            for (Real v : row) norm += v * v;
            norm = std::sqrt(norm);
            if (norm > 1e-8) {
              for (Real& v : row) v /= norm;
              break;
            }
          }
        }
      }
      return;
    }
  }
}

Parameter& ParameterSet::Add(const std::string& name, std::vector<size_t> shape,
                             Init init, Rng& rng, bool trainable) {
  Tensor t(std::move(shape));
  InitializeTensor(t, init, rng);
  return Add(name, std::move(t), trainable);
}

Parameter& ParameterSet::Add(const std::string& name, Tensor value,
                             bool trainable) {
  if (index_.count(name)) throw Error("duplicate parameter name: " + name);
  index_[name] = params_.size();
  params_.push_back(std::make_unique<Parameter>(name, std::move(value), trainable));
  return *params_.back();
}

Parameter* ParameterSet::Find(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : params_[it->second].get();
}

const Parameter* ParameterSet::Find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : params_[it->second].get();
}

Parameter& ParameterSet::Get(const std::string& name) {
  Parameter* p = Find(name);
  if (!p) throw Error("no parameter named " + name);
  return *p;
}

const Parameter& ParameterSet::Get(const std::string& name) const {
  const Parameter* p = Find(name);
  if (!p) throw Error("no parameter named " + name);
  return *p;
}

std::vector<Parameter*> ParameterSet::All() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParameterSet::All() const {
  std::vector<const Parameter*> out;
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

size_t ParameterSet::CountValues(bool trainable_only) const {
  size_t n = 0;
  for (const auto& p : params_) {
    if (!trainable_only || p->trainable) n += p->value.size();
  }
  return n;
}

void ParameterSet::ZeroGrad() {
  for (auto& p : params_) p->grad.Fill(0.0);
}

std::vector<Tensor> ParameterSet::Snapshot() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p->value);
  return out;
}

void ParameterSet::Restore(const std::vector<Tensor>& snapshot) {
  if (snapshot.size() != params_.size()) {
    throw Error("snapshot does not match parameter set");
  }
  for (size_t i = 0; i < params_.size(); ++i) params_[i]->value = snapshot[i];
}

void ParameterSet::Save(std::ostream& out) const {
  out << "udparse-params " << kFormatVersion << "\n";
  out << "count " << params_.size() << "\n";
  char buf[64];
  for (const auto& p : params_) {
    out << "param " << p->name << " " << (p->trainable ? 1 : 0) << " "
        << p->value.rank();
    for (size_t e : p->value.shape()) out << " " << e;
    out << "\n";
    for (size_t i = 0; i < p->value.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%a", p->value[i]);
      if (i) out << ' ';
      out << buf;
    }
    out << "\n";
  }
}

namespace {

struct RawParam {
  std::string name;
  bool trainable;
  Tensor value;
};

std::vector<RawParam> ReadContainer(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "udparse-params") {
    throw DataError("not a udparse parameter container");
  }
  if (version != ParameterSet::kFormatVersion) {
    throw VersionError("unsupported parameter container version " +
                       std::to_string(version));
  }
  std::string word;
  size_t count = 0;
  if (!(in >> word >> count) || word != "count") {
    throw DataError("parameter container: missing count");
  }
  std::vector<RawParam> out;
  for (size_t i = 0; i < count; ++i) {
    RawParam raw;
    int trainable = 0;
    size_t rank = 0;
    if (!(in >> word >> raw.name >> trainable >> rank) || word != "param") {
      throw DataError("parameter container: bad header for entry " +
                      std::to_string(i));
    }
    raw.trainable = trainable != 0;
    std::vector<size_t> shape(rank);
    for (size_t& e : shape) {
      if (!(in >> e)) throw DataError("parameter container: bad shape");
    }
    Tensor t(shape);
    std::string tok;
    for (size_t k = 0; k < t.size(); ++k) {
      if (!(in >> tok)) {
        throw DataError("parameter container: truncated values for " + raw.name);
      }
      t[k] = std::strtod(tok.c_str(), nullptr);
    }
    raw.value = std::move(t);
    out.push_back(std::move(raw));
  }
  return out;
}

}  // namespace

void ParameterSet::Load(std::istream& in) {
  std::vector<RawParam> raw = ReadContainer(in);
  std::map<std::string, size_t> seen;
  for (size_t i = 0; i < raw.size(); ++i) seen[raw[i].name] = i;
  for (auto& p : params_) {
    auto it = seen.find(p->name);
    if (it == seen.end()) throw DataError("parameter missing from file: " + p->name);
    const Tensor& v = raw[it->second].value;
    if (v.shape() != p->value.shape()) {
      throw DimensionError("parameter " + p->name + ": file shape " +
                           ShapeString(v.shape()) + " vs model " +
                           ShapeString(p->value.shape()));
    }
    p->value = v;
  }
}

ParameterSet ParameterSet::ReadAll(std::istream& in) {
  ParameterSet set;
  for (RawParam& raw : ReadContainer(in)) {
    set.Add(raw.name, std::move(raw.value), raw.trainable);
  }
  return set;
}

double GlobalGradNorm(const std::vector<Parameter*>& params) {
  double sq = 0.0;
  for (const Parameter* p : params) {
    if (!p->trainable) continue;
    for (Real g : p->grad.values()) sq += g * g;
  }
  return std::sqrt(sq);
}

void Adam::Step(ParameterSet& params) { Step(params.All()); }

void Adam::Step(const std::vector<Parameter*>& params) {
  ++step_;
  double scale = 1.0;
  if (config_.clip_norm > 0.0) {
    const double norm = GlobalGradNorm(params);
    if (norm > config_.clip_norm) scale = config_.clip_norm / norm;
  }
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (Parameter* p : params) {
    if (!p->trainable) {
      p->grad.Fill(0.0);
      continue;
    }
    for (size_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad[i] * scale;
      double& m = p->first_moment[i];
      double& v = p->second_moment[i];
      m = b1 * m + (1.0 - b1) * g;
      v = b2 * v + (1.0 - b2) * g * g;
      const double m_hat = m / correction1;
      const double v_hat = v / correction2;
      p->value[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
    p->grad.Fill(0.0);
  }
}

}  // namespace udparse
