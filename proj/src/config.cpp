#include "treesrl/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace treesrl {

const char* to_string(TaskMode m) {
  return m == TaskMode::role_only ? "role-only" : "end-to-end";
}

TaskMode task_mode_from_string(const std::string& s) {
  if (s == "role-only" || s == "role_only") return TaskMode::role_only;
  if (s == "end-to-end" || s == "end_to_end") return TaskMode::end_to_end;
  throw usage_error("unknown mode '" + s + "' (expected role-only|end-to-end)");
}

const char* to_string(PruneMode m) {
  switch (m) {
    case PruneMode::rule: return "rule";
    case PruneMode::korder: return "korder";
    default: return "none";
  }
}

PruneMode prune_mode_from_string(const std::string& s) {
  if (s == "rule") return PruneMode::rule;
  if (s == "korder") return PruneMode::korder;
  if (s == "none") return PruneMode::none;
  throw usage_error("unknown prune mode '" + s + "' (expected rule|korder|none)");
}

namespace {

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> f = [] {
    std::map<std::string, Field> m;
    auto add_int = [&](const std::string& key, int RunConfig::*p) {
      m[key] = {[p](const RunConfig& c) { return std::to_string(c.*p); },
                [p, key](RunConfig& c, const std::string& v) {
                  try {
                    c.*p = std::stoi(v);
                  } catch (const std::exception&) {
                    throw usage_error("config: bad integer for " + key + ": '" + v + "'");
                  }
                }};
    };
    auto add_double = [&](const std::string& key, double RunConfig::*p) {
      m[key] = {[p](const RunConfig& c) { return fmt_double(c.*p); },
                [p, key](RunConfig& c, const std::string& v) {
                  try {
                    c.*p = std::stod(v);
                  } catch (const std::exception&) {
                    throw usage_error("config: bad number for " + key + ": '" + v + "'");
                  }
                }};
    };
    auto add_bool = [&](const std::string& key, bool RunConfig::*p) {
      m[key] = {[p](const RunConfig& c) { return (c.*p) ? "true" : "false"; },
                [p, key](RunConfig& c, const std::string& v) {
                  if (v == "true" || v == "1")
                    c.*p = true;
                  else if (v == "false" || v == "0")
                    c.*p = false;
                  else
                    throw usage_error("config: bad boolean for " + key + ": '" + v + "'");
                }};
    };
    add_int("threads", &RunConfig::threads);
    add_int("korder", &RunConfig::korder);
    add_int("word_dim", &RunConfig::word_dim);
    add_int("lemma_dim", &RunConfig::lemma_dim);
    add_int("pos_dim", &RunConfig::pos_dim);
    add_int("pretrained_dim", &RunConfig::pretrained_dim);
    add_int("indicator_dim", &RunConfig::indicator_dim);
    add_int("contextual_dim", &RunConfig::contextual_dim);
    add_int("lstm_layers", &RunConfig::lstm_layers);
    add_int("lstm_hidden", &RunConfig::lstm_hidden);
    add_int("mlp_dim", &RunConfig::mlp_dim);
    add_int("epochs", &RunConfig::epochs);
    add_int("batch_size", &RunConfig::batch_size);
    add_int("eval_every", &RunConfig::eval_every);
    add_bool("use_pos", &RunConfig::use_pos);
    add_bool("use_lemma", &RunConfig::use_lemma);
    add_bool("finetune_pretrained", &RunConfig::finetune_pretrained);
    add_double("lstm_keep", &RunConfig::lstm_keep);
    add_double("mlp_keep", &RunConfig::mlp_keep);
    add_double("lr", &RunConfig::lr);
    add_double("beta1", &RunConfig::beta1);
    add_double("beta2", &RunConfig::beta2);
    add_double("adam_eps", &RunConfig::adam_eps);
    add_double("early_stop_f1", &RunConfig::early_stop_f1);
    add_double("unk_prob", &RunConfig::unk_prob);
    m["seed"] = {[](const RunConfig& c) { return std::to_string(c.seed); },
                 [](RunConfig& c, const std::string& v) {
                   try {
                     c.seed = std::stoull(v);
                   } catch (const std::exception&) {
                     throw usage_error("config: bad seed '" + v + "'");
                   }
                 }};
    m["language"] = {[](const RunConfig& c) { return c.language; },
                     [](RunConfig& c, const std::string& v) { c.language = v; }};
    m["syntax"] = {[](const RunConfig& c) { return std::string(to_string(c.syntax)); },
                   [](RunConfig& c, const std::string& v) {
                     c.syntax = syntax_source_from_string(v);
                   }};
    m["mode"] = {[](const RunConfig& c) { return std::string(to_string(c.mode)); },
                 [](RunConfig& c, const std::string& v) { c.mode = task_mode_from_string(v); }};
    m["prune"] = {[](const RunConfig& c) { return std::string(to_string(c.prune)); },
                  [](RunConfig& c, const std::string& v) {
                    c.prune = prune_mode_from_string(v);
                  }};
    return m;
  }();
  return f;
}

}  // namespace

std::string RunConfig::serialize() const {
  std::ostringstream os;
  for (const auto& [key, field] : fields()) os << key << " = " << field.get(*this) << '\n';
  return os.str();
}

RunConfig RunConfig::deserialize(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::string s = strip(line);
    if (s.empty() || s[0] == '#') continue;
    std::size_t eq = s.find('=');
    if (eq == std::string::npos) throw usage_error("config: expected 'key = value': " + s);
    cfg.apply_line(strip(s.substr(0, eq)), strip(s.substr(eq + 1)));
  }
  return cfg;
}

void RunConfig::apply_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open config file: " + path);
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = strip(line);
    if (s.empty() || s[0] == '#') continue;
    std::size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw usage_error("config file line " + std::to_string(lineno) +
                        ": expected 'key = value'");
    apply_line(strip(s.substr(0, eq)), strip(s.substr(eq + 1)));
  }
}

void RunConfig::apply_line(const std::string& key, const std::string& value) {
  auto it = fields().find(key);
  if (it == fields().end()) throw usage_error("unknown config key '" + key + "'");
  it->second.set(*this, value);
}

const std::vector<std::string>& RunConfig::architecture_keys() {
  static const std::vector<std::string> keys = {
      "word_dim",     "lemma_dim",  "pos_dim",     "pretrained_dim", "indicator_dim",
      "contextual_dim", "use_pos",  "use_lemma",   "lstm_layers",    "lstm_hidden",
      "mlp_dim",      "mode"};
  return keys;
}

}  // namespace treesrl
