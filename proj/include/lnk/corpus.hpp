#pragma once

#include <string>
#include <vector>

#include "lnk/protocol.hpp"

// The shipped example protocols. Each entry's text is byte-for-byte the
// content of corpus/<name>.lnk; a test keeps the two in sync.

namespace lnk {

struct CorpusEntry {
  std::string name;  // file stem
  std::string text;  // DSL source
  int nodes = 0;
  int edges = 0;
};

const std::vector<CorpusEntry>& corpus();
const CorpusEntry& corpus_entry(const std::string& name);  // OpError if unknown
Protocol corpus_protocol(const std::string& name);

}  // namespace lnk
