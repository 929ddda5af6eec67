// SPDX-License-Identifier: Apache-2.0
#include "mpogpt/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "mpogpt/errors.hpp"

namespace mpogpt {

using Json = nlohmann::ordered_json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr std::array<char, 8> kMagic{'M', 'P', 'O', 'G', 'P', 'T', 'C', 'K'};

ParamRole parse_role(const std::string& s) {
  for (auto role : {ParamRole::kEmbedding, ParamRole::kWeight, ParamRole::kCore, ParamRole::kBias, ParamRole::kNorm}) {
    if (s == to_string(role)) return role;
  }
  throw InputError("unknown parameter role '" + s + "'");
}

Json plan_json(const FactorizationPlan& plan) { return Json{{"d_out", plan.d_out}, {"d_in", plan.d_in}}; }

Json model_json(const ModelConfig& m) {
  Json overrides = Json::object();
  for (const auto& [kind, plan] : m.plan_overrides) overrides[to_string(kind)] = plan_json(plan);
  return Json{{"vocab", m.vocab},
              {"embed", m.embed},
              {"heads", m.heads},
              {"layers", m.layers},
              {"context", m.context},
              {"mode", to_string(m.mode)},
              {"chi", m.chi},
              {"plan_chi", m.plan_chi},
              {"attn_sites", m.attn_sites},
              {"ffn_sites", m.ffn_sites},
              {"head_sites", m.head_sites},
              {"init_std", m.init_std},
              {"plan_overrides", overrides}};
}

Json train_json(const TrainConfig& t) {
  Json roles = Json::array();
  for (auto r : t.decay_roles) roles.push_back(to_string(r));
  return Json{{"steps", t.steps},
              {"batch", t.batch},
              {"seq", t.seq},
              {"lr_max", t.lr_max},
              {"lr_min", t.lr_min},
              {"warmup", t.warmup},
              {"beta1", t.beta1},
              {"beta2", t.beta2},
              {"eps", t.eps},
              {"weight_decay", t.weight_decay},
              {"decay_roles", roles},
              {"clip_norm", t.clip_norm},
              {"eval_every", t.eval_every},
              {"eval_batches", t.eval_batches},
              {"eval_batch_size", t.eval_batch_size},
              {"seed", t.seed},
              {"eval_seed", t.eval_seed}};
}

// Reads the keys of `j` into fields, rejecting unknown keys.
class Reader {
 public:
  Reader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw InputError(where_ + ": expected an object");
  }

  template <typename V>
  Reader& get(const char* key, V& field) {
    seen_.push_back(key);
    if (auto it = j_.find(key); it != j_.end()) {
      try {
        if constexpr (std::is_unsigned_v<V>) {
          if (!it->is_number_unsigned()) throw InputError("expected a non-negative integer");
        }
        field = it->template get<V>();
      } catch (const std::exception& e) {
        throw InputError(where_ + "." + key + ": " + e.what());
      }
    }
    return *this;
  }

  const Json* find(const char* key) {
    seen_.push_back(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (std::find(seen_.begin(), seen_.end(), key) == seen_.end()) {
        throw InputError(where_ + ": unknown key '" + key + "'");
      }
    }
  }

 private:
  const Json& j_;
  std::string where_;
  std::vector<std::string> seen_;
};

ModelConfig model_from_json(const Json& j) {
  ModelConfig m;
  Reader r(j, "model");
  std::string mode = to_string(m.mode);
  r.get("vocab", m.vocab)
      .get("embed", m.embed)
      .get("heads", m.heads)
      .get("layers", m.layers)
      .get("context", m.context)
      .get("mode", mode)
      .get("chi", m.chi)
      .get("plan_chi", m.plan_chi)
      .get("attn_sites", m.attn_sites)
      .get("ffn_sites", m.ffn_sites)
      .get("head_sites", m.head_sites)
      .get("init_std", m.init_std);
  m.mode = parse_linear_mode(mode);
  if (const Json* ov = r.find("plan_overrides")) {
    if (!ov->is_object()) throw InputError("model.plan_overrides: expected an object");
    for (const auto& [key, value] : ov->items()) {
      FactorizationPlan plan;
      Reader pr(value, "model.plan_overrides." + key);
      pr.get("d_out", plan.d_out).get("d_in", plan.d_in).finish();
      m.plan_overrides[parse_layer_kind(key)] = plan;
    }
  }
  r.finish();
  return m;
}

TrainConfig train_from_json(const Json& j) {
  TrainConfig t;
  Reader r(j, "train");
  r.get("steps", t.steps)
      .get("batch", t.batch)
      .get("seq", t.seq)
      .get("lr_max", t.lr_max)
      .get("lr_min", t.lr_min)
      .get("warmup", t.warmup)
      .get("beta1", t.beta1)
      .get("beta2", t.beta2)
      .get("eps", t.eps)
      .get("weight_decay", t.weight_decay)
      .get("clip_norm", t.clip_norm)
      .get("eval_every", t.eval_every)
      .get("eval_batches", t.eval_batches)
      .get("eval_batch_size", t.eval_batch_size)
      .get("seed", t.seed)
      .get("eval_seed", t.eval_seed);
  if (const Json* roles = r.find("decay_roles")) {
    if (!roles->is_array()) throw InputError("train.decay_roles: expected an array");
    t.decay_roles.clear();
    for (const auto& role : *roles) {
      if (!role.is_string()) throw InputError("train.decay_roles: expected role names");
      t.decay_roles.insert(parse_role(role.get<std::string>()));
    }
  }
  r.finish();
  return t;
}

Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw InputError(what + ": " + e.what());
  }
}

void put_u64(std::string& out, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

}  // namespace

std::string to_json(const RunConfig& cfg) {
  Json j{{"model", model_json(cfg.model)},
         {"train", train_json(cfg.train)},
         {"corpus", Json{{"path", cfg.corpus.path}, {"url", cfg.corpus.url}, {"sha256", cfg.corpus.sha256}}},
         {"chis", cfg.chis}};
  return j.dump(2) + "\n";
}

RunConfig run_config_from_json(const std::string& text) {
  Json j = parse_json(text, "config");
  RunConfig cfg;
  Reader r(j, "config");
  if (const Json* m = r.find("model")) cfg.model = model_from_json(*m);
  if (const Json* t = r.find("train")) cfg.train = train_from_json(*t);
  if (const Json* c = r.find("corpus")) {
    Reader cr(*c, "corpus");
    cr.get("path", cfg.corpus.path).get("url", cfg.corpus.url).get("sha256", cfg.corpus.sha256).finish();
  }
  r.get("chis", cfg.chis);
  r.finish();
  // vocab 0 is resolved against the corpus later.
  ModelConfig probe = cfg.model;
  if (probe.vocab == 0) probe.vocab = 65;
  probe.validate();
  cfg.train.validate();
  for (auto chi : cfg.chis) {
    if (chi < 1) throw InputError("config.chis: entries must be >= 1");
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return run_config_from_json(read_text_file(path));
}

// ---- checkpoints --------------------------------------------------------

void save_checkpoint(const std::filesystem::path& path, const TransformerF& model, const TrainConfig& train,
                     const CharVocab& vocab) {
  Json tensors = Json::array();
  std::uint64_t offset = 0;
  for (const auto& p : model.params()) {
    std::uint64_t length = p.value.size() * sizeof(float);
    tensors.push_back(Json{{"name", p.name},
                           {"role", to_string(p.role)},
                           {"dtype", "f32"},
                           {"shape", p.value.shape()},
                           {"offset", offset},
                           {"length", length}});
    offset += length;
  }
  std::vector<std::uint32_t> cps(vocab.chars().begin(), vocab.chars().end());
  Json header{{"format", "mpogpt-checkpoint"},
              {"version", kCheckpointVersion},
              {"kind", to_string(model.config().mode)},
              {"model", model_json(model.config())},
              {"train", train_json(train)},
              {"vocab", cps},
              {"tensors", tensors},
              {"payload_length", offset}};
  std::string head = header.dump();

  std::string out(kMagic.begin(), kMagic.end());
  put_u64(out, head.size());
  out += head;
  out.reserve(out.size() + offset);
  for (const auto& p : model.params()) {
    out.append(reinterpret_cast<const char*>(p.value.data().data()), p.value.size() * sizeof(float));
  }
  write_file_atomic(path, out);
}

CheckpointData load_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = read_text_file(path);
  const std::string where = "checkpoint '" + path.string() + "'";
  if (bytes.size() < 16 || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw InputError(where + ": not a checkpoint (bad magic)");
  }
  std::uint64_t head_len;
  std::memcpy(&head_len, bytes.data() + 8, 8);
  if (head_len > bytes.size() - 16) throw InputError(where + ": truncated header");
  Json header = parse_json(bytes.substr(16, head_len), where + " header");

  try {
    if (header.value("format", "") != "mpogpt-checkpoint") throw InputError("unknown format");
    int version = header.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw InputError("version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(kCheckpointVersion) + ")");
    }
    ModelConfig mcfg = model_from_json(header.at("model"));
    if (header.at("kind").get<std::string>() != to_string(mcfg.mode)) {
      throw InputError("kind does not match model mode");
    }
    TrainConfig tcfg = train_from_json(header.at("train"));

    std::u32string chars;
    for (auto cp : header.at("vocab").get<std::vector<std::uint32_t>>()) chars.push_back(static_cast<char32_t>(cp));
    CharVocab vocab(std::move(chars));

    const std::uint64_t payload_len = header.at("payload_length").get<std::uint64_t>();
    const std::uint64_t payload_start = 16 + head_len;
    if (bytes.size() - payload_start != payload_len) {
      throw InputError("payload is " + std::to_string(bytes.size() - payload_start) + " bytes, header declares " +
                       std::to_string(payload_len) + (bytes.size() - payload_start < payload_len ? " (truncated)" : ""));
    }

    std::vector<Parameter<float>> params;
    std::uint64_t expected_offset = 0;
    for (const auto& t : header.at("tensors")) {
      auto name = t.at("name").get<std::string>();
      auto dtype = t.at("dtype").get<std::string>();
      auto shape = t.at("shape").get<Shape>();
      auto offset = t.at("offset").get<std::uint64_t>();
      auto length = t.at("length").get<std::uint64_t>();
      std::size_t elem = dtype == "f32" ? 4 : dtype == "f64" ? 8 : 0;
      if (elem == 0) throw InputError("tensor '" + name + "': unsupported dtype '" + dtype + "'");
      if (offset != expected_offset) {
        throw InputError("tensor '" + name + "': offset " + std::to_string(offset) +
                         (offset < expected_offset ? " overlaps the previous tensor" : " leaves a gap"));
      }
      if (length != shape_size(shape) * elem) throw InputError("tensor '" + name + "': length does not match shape");
      if (offset + length > payload_len) throw InputError("tensor '" + name + "' extends past the payload");
      const char* src = bytes.data() + payload_start + offset;
      std::vector<float> values(shape_size(shape));
      if (elem == 4) {
        std::memcpy(values.data(), src, length);
      } else {
        std::vector<double> wide(values.size());
        std::memcpy(wide.data(), src, length);
        std::copy(wide.begin(), wide.end(), values.begin());
      }
      params.push_back({name, parse_role(t.at("role").get<std::string>()), Tensor<float>(shape, std::move(values))});
      expected_offset = offset + length;
    }
    if (expected_offset != payload_len) throw InputError("tensor lengths do not add up to the payload length");
    if (vocab.size() != mcfg.vocab) throw InputError("vocabulary size does not match the model");
    return {TransformerF::from_params(mcfg, std::move(params)), tcfg, std::move(vocab)};
  } catch (const InputError& e) {
    throw InputError(where + ": " + e.what());
  } catch (const ShapeError& e) {
    throw InputError(where + ": " + e.what());
  } catch (const Json::exception& e) {
    throw InputError(where + ": malformed header: " + e.what());
  }
}

// ---- text outputs -------------------------------------------------------

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw InputError("cannot write '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

std::string metrics_csv_header() { return "step,train_loss,val_loss,val_acc,lr\n"; }

std::string metrics_csv_row(const MetricsRecord& rec) {
  return std::to_string(rec.step) + "," + format_double(rec.train_loss) + "," + format_double(rec.val_loss) + "," +
         format_double(rec.val_acc) + "," + format_double(rec.lr) + "\n";
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRecord>& records) {
  std::string out = metrics_csv_header();
  for (const auto& r : records) out += metrics_csv_row(r);
  write_file_atomic(path, out);
}

void write_layer_errors_csv(const std::filesystem::path& path, const std::vector<LayerError>& layers) {
  std::string out = "layer,chi,rel_err,params_dense,params_mpo\n";
  for (const auto& l : layers) {
    out += l.layer + "," + std::to_string(l.chi) + "," + format_double(l.rel_err) + "," +
           std::to_string(l.params_dense) + "," + std::to_string(l.params_mpo) + "\n";
  }
  write_file_atomic(path, out);
}

void finalize_sweep_rows(std::vector<SweepRow>& rows) {
  if (rows.empty()) return;
  const auto& dense = rows.front();
  for (auto& r : rows) {
    r.ratio = r.params > 0 ? static_cast<double>(dense.params) / static_cast<double>(r.params) : 0.0;
    r.acc_gap = dense.val_acc - r.val_acc;
    r.acc_per_sqrt_params = r.params > 0 ? r.val_acc / std::sqrt(static_cast<double>(r.params)) : 0.0;
  }
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
  std::string out = "name,mode,chi,params,ratio,val_loss,val_acc,acc_gap,acc_per_sqrt_params,status\n";
  for (const auto& r : rows) {
    out += r.name + "," + r.mode + "," + std::to_string(r.chi) + "," + std::to_string(r.params) + "," +
           format_double(r.ratio) + "," + format_double(r.val_loss) + "," + format_double(r.val_acc) + "," +
           format_double(r.acc_gap) + "," + format_double(r.acc_per_sqrt_params) + ",\"" + r.status + "\"\n";
  }
  write_file_atomic(path, out);
}

void write_sweep_json(const std::filesystem::path& path, const std::vector<SweepRow>& rows,
                      const std::vector<LayerError>& layers) {
  auto num = [](double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); };
  Json models = Json::array();
  for (const auto& r : rows) {
    models.push_back(Json{{"name", r.name},
                          {"mode", r.mode},
                          {"chi", r.chi},
                          {"params", r.params},
                          {"ratio", num(r.ratio)},
                          {"val_loss", num(r.val_loss)},
                          {"val_acc", num(r.val_acc)},
                          {"acc_gap", num(r.acc_gap)},
                          {"acc_per_sqrt_params", num(r.acc_per_sqrt_params)},
                          {"status", r.status}});
  }
  Json layer_rows = Json::array();
  for (const auto& l : layers) {
    layer_rows.push_back(Json{{"layer", l.layer},
                              {"chi", l.chi},
                              {"rel_err", num(l.rel_err)},
                              {"params_dense", l.params_dense},
                              {"params_mpo", l.params_mpo}});
  }
  write_file_atomic(path, Json{{"models", models}, {"layers", layer_rows}}.dump(2) + "\n");
}

}  // namespace mpogpt
