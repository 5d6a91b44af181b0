#ifndef TREESRL_CHECKPOINT_HPP
#define TREESRL_CHECKPOINT_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "treesrl/nn.hpp"

namespace treesrl {

// Self-describing binary container: magic string, format version, config
// echo, extra named text sections (vocabularies), then named tensors as
// (name, shape, little-endian f64 payload). Laid out byte-exactly in
// docs/formats.md.
struct Checkpoint {
  std::string config_text;
  std::vector<std::pair<std::string, std::string>> sections;  // name -> text
  ModelParams params;

  const std::string* section(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ckpt, std::ostream& out);
void save_checkpoint_file(const Checkpoint& ckpt, const std::string& path);
std::string checkpoint_bytes(const Checkpoint& ckpt);

Checkpoint load_checkpoint(std::istream& in);
Checkpoint load_checkpoint_file(const std::string& path);

}  // namespace treesrl

#endif
