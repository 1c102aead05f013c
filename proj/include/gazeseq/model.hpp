#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <variant>

#include "gazeseq/binary_io.hpp"
#include "gazeseq/lstm.hpp"
#include "gazeseq/transformer.hpp"

namespace gazeseq {

enum class Arch : std::uint8_t { lstm = LstmGazeModel::kArchId, transformer = TransformerGazeModel::kArchId };

inline std::string_view arch_name(Arch a) {
  return a == Arch::lstm ? LstmGazeModel::kArchName : TransformerGazeModel::kArchName;
}

inline Arch parse_arch(std::string_view s) {
  if (s == LstmGazeModel::kArchName) return Arch::lstm;
  if (s == TransformerGazeModel::kArchName) return Arch::transformer;
  throw Error("unknown architecture '" + std::string(s) + "' (expected lstm or transformer)");
}

/// Either trained network behind one value type.
class GazeModel {
 public:
  using Variant = std::variant<LstmGazeModel, TransformerGazeModel>;

  GazeModel(Arch arch, std::size_t n_classes, std::uint64_t seed)
      : net_(arch == Arch::lstm ? Variant(LstmGazeModel(n_classes, seed))
                                : Variant(TransformerGazeModel(n_classes, seed))) {}
  explicit GazeModel(LstmGazeModel m) : net_(std::move(m)) {}
  explicit GazeModel(TransformerGazeModel m) : net_(std::move(m)) {}

  Arch arch() const { return std::holds_alternative<LstmGazeModel>(net_) ? Arch::lstm : Arch::transformer; }
  std::size_t n_classes() const {
    return std::visit([](const auto& m) { return m.n_classes(); }, net_);
  }
  std::size_t param_count() const {
    return std::visit([](const auto& m) { return m.param_count(); }, net_);
  }
  nn::ParamList params() {
    return std::visit([](auto& m) { return m.params(); }, net_);
  }
  nn::ConstParamList params() const {
    return std::visit([](const auto& m) { return m.params(); }, net_);
  }

  Matrix forward(const nn::Batch& x) const {
    return std::visit([&](const auto& m) { return m.forward(x); }, net_);
  }
  double loss(const nn::Batch& x, const Matrix& target_weights) const {
    return std::visit([&](const auto& m) { return m.loss(x, target_weights); }, net_);
  }
  double loss_and_gradients(const nn::Batch& x, const Matrix& target_weights, nn::Mode mode, std::uint64_t seed) {
    return std::visit([&](auto& m) { return m.loss_and_gradients(x, target_weights, mode, seed); }, net_);
  }

  Variant& net() { return net_; }
  const Variant& net() const { return net_; }

 private:
  Variant net_;
};

// ---- GZWT weights file -------------------------------------------------------------------

inline constexpr std::uint32_t kWeightsVersion = 1;

inline void write_weights(std::ostream& out, const GazeModel& model) {
  io::write_magic(out, "GZWT");
  io::write_le<std::uint32_t>(out, kWeightsVersion);
  io::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(model.arch()));
  io::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(model.n_classes()));
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.param_count()));
  for (const auto* p : model.params()) {
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(p->value.rows()));
    io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(p->value.cols()));
    for (Eigen::Index i = 0; i < p->value.size(); ++i) io::write_le<double>(out, p->value.data()[i]);
  }
  if (!out) throw Error("failed writing weights");
}

inline GazeModel read_weights(std::istream& in) {
  io::expect_magic(in, "GZWT", "GZWT weights");
  if (io::read_le<std::uint32_t>(in) != kWeightsVersion) throw Error("unsupported GZWT version");
  const auto arch_id = io::read_le<std::uint8_t>(in);
  if (arch_id != LstmGazeModel::kArchId && arch_id != TransformerGazeModel::kArchId) {
    throw Error("GZWT: unknown architecture id " + std::to_string(arch_id));
  }
  const auto n_classes = io::read_le<std::uint8_t>(in);
  if (n_classes < 2) throw Error("GZWT: class count must be at least 2");
  const auto declared = io::read_le<std::uint32_t>(in);
  GazeModel model(static_cast<Arch>(arch_id), n_classes, 0);
  if (declared != model.param_count()) {
    throw Error("GZWT: parameter count " + std::to_string(declared) + " does not match the architecture (" +
                std::to_string(model.param_count()) + ")");
  }
  for (auto* p : model.params()) {
    const auto len = io::read_le<std::uint32_t>(in);
    if (len > 4096) throw Error("GZWT: tensor name too long");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw Error("unexpected end of file");
    if (name != p->name) throw Error("GZWT: expected tensor '" + p->name + "', found '" + name + "'");
    const auto rows = io::read_le<std::uint32_t>(in);
    const auto cols = io::read_le<std::uint32_t>(in);
    if (rows != p->value.rows() || cols != p->value.cols()) throw Error("GZWT: shape mismatch for " + name);
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      const double v = io::read_le<double>(in);
      if (!std::isfinite(v)) throw Error("GZWT: non-finite value in " + name);
      p->value.data()[i] = v;
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw Error("GZWT: trailing bytes after last tensor");
  return model;
}

inline void save_weights(const GazeModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_weights(out, model);
}

inline GazeModel load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_weights(in);
}

}  // namespace gazeseq
