#pragma once

// Disassembly snapshot: the JSON interchange document describing one binary.
// Schema v1 is documented in docs/snapshot_schema.md.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "regionscan/error.hpp"

namespace regionscan {

using Address = std::uint64_t;
using NodeId = std::uint32_t;

inline constexpr int kSnapshotSchemaVersion = 1;
/// Warning marker an exporter sets when the binary exceeds the function budget.
inline constexpr std::string_view kFunctionLimitWarning = "function_limit_exceeded";

struct Instruction {
  Address address = 0;
  std::string mnemonic;
  bool is_call = false;
  std::optional<Address> call_target;

  bool operator==(const Instruction&) const = default;
};

struct BasicBlock {
  NodeId id = 0;
  Address start_addr = 0;
  std::vector<Instruction> instructions;

  bool contains_address(Address a) const {
    return std::any_of(instructions.begin(), instructions.end(),
                       [a](const Instruction& i) { return i.address == a; });
  }
  bool calls(Address target) const {
    return std::any_of(instructions.begin(), instructions.end(), [target](const Instruction& i) {
      return i.is_call && i.call_target == target;
    });
  }

  bool operator==(const BasicBlock&) const = default;
};

struct Section {
  std::string name;
  std::uint64_t virtual_size = 0;
  std::uint64_t physical_size = 0;

  bool operator==(const Section&) const = default;
};

struct ImportedApi {
  std::string name;
  Address plt_addr = 0;

  bool operator==(const ImportedApi&) const = default;
};

struct StringEntry {
  std::string text;
  std::vector<Address> ref_addrs;

  bool operator==(const StringEntry&) const = default;
};

struct CallSite {
  Address caller_addr = 0;
  Address callee_addr = 0;

  bool operator==(const CallSite&) const = default;
};

struct FunctionRecord {
  std::string name;
  Address entry_addr = 0;
  /// Byte extent of the function body; when absent the function is taken to
  /// run up to the next function's entry.
  std::optional<std::uint64_t> size;
  std::vector<CallSite> call_sites;

  bool operator==(const FunctionRecord&) const = default;
};

struct EntryFunction {
  std::string name;
  Address addr = 0;

  bool operator==(const EntryFunction&) const = default;
};

struct DisassemblySnapshot {
  std::string binary_id;
  std::vector<Section> sections;
  std::vector<ImportedApi> imports;
  std::vector<StringEntry> strings;
  std::vector<FunctionRecord> functions;
  EntryFunction entry_function;
  std::vector<BasicBlock> entry_blocks;  // indexed by NodeId
  std::vector<std::pair<NodeId, NodeId>> entry_edges;
  std::vector<std::string> warnings;

  bool has_warning(std::string_view w) const {
    return std::find(warnings.begin(), warnings.end(), w) != warnings.end();
  }

  /// NodeId of the block holding the entry address, if any.
  std::optional<NodeId> entry_node() const {
    for (const auto& b : entry_blocks) {
      if (b.start_addr == entry_function.addr || b.contains_address(entry_function.addr)) return b.id;
    }
    return std::nullopt;
  }

  bool operator==(const DisassemblySnapshot&) const = default;
};

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& obj, const char* key, std::string_view where) {
  if (!obj.is_object()) throw SchemaError(std::string(where) + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(std::string(where) + ": missing required field '" + key + "'");
  return *it;
}

inline const nlohmann::json& require_array(const nlohmann::json& obj, const char* key, std::string_view where) {
  const auto& v = require(obj, key, where);
  if (!v.is_array()) throw SchemaError(std::string(where) + "." + key + ": expected an array");
  return v;
}

inline std::uint64_t as_uint(const nlohmann::json& v, std::string_view where) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw SchemaError(std::string(where) + ": expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

inline std::string as_string(const nlohmann::json& v, std::string_view where) {
  if (!v.is_string()) throw SchemaError(std::string(where) + ": expected a string");
  return v.get<std::string>();
}

inline bool valid_mnemonic(std::string_view m) {
  if (m.empty()) return false;
  return std::none_of(m.begin(), m.end(), [](unsigned char c) {
    return std::isspace(c) || std::isupper(c) || c < 0x20;
  });
}

inline Instruction parse_instruction(const nlohmann::json& j, const std::string& where) {
  Instruction ins;
  ins.address = as_uint(require(j, "addr", where), where + ".addr");
  ins.mnemonic = as_string(require(j, "mnemonic", where), where + ".mnemonic");
  if (!valid_mnemonic(ins.mnemonic)) {
    throw SchemaError(where + ".mnemonic: '" + ins.mnemonic + "' must be non-empty lowercase without whitespace");
  }
  ins.is_call = ins.mnemonic == "call";
  if (auto it = j.find("is_call"); it != j.end()) {
    if (!it->is_boolean()) throw SchemaError(where + ".is_call: expected a boolean");
    ins.is_call = it->get<bool>();
  }
  if (auto it = j.find("call_target"); it != j.end() && !it->is_null()) {
    ins.call_target = as_uint(*it, where + ".call_target");
    if (!ins.is_call) throw SchemaError(where + ": call_target present on a non-call instruction");
  }
  return ins;
}

}  // namespace detail

/// Parses and validates a schema v1 snapshot. Unknown keys are ignored.
inline DisassemblySnapshot parse_snapshot(std::string_view raw) {
  using nlohmann::json;
  using namespace detail;
  json doc;
  try {
    doc = json::parse(raw.begin(), raw.end());
  } catch (const json::parse_error& e) {
    throw DecodeError(std::string("snapshot is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw SchemaError("snapshot: top level must be an object");

  if (auto it = doc.find("schema_version"); it != doc.end()) {
    if (!it->is_number_integer() || it->get<int>() != kSnapshotSchemaVersion) {
      throw SchemaError("snapshot: unsupported schema_version");
    }
  }

  DisassemblySnapshot s;
  s.binary_id = as_string(require(doc, "binary_id", "snapshot"), "snapshot.binary_id");

  for (const auto& j : require_array(doc, "sections", "snapshot")) {
    Section sec;
    sec.name = as_string(require(j, "name", "section"), "section.name");
    sec.virtual_size = as_uint(require(j, "virtual_size", "section"), "section.virtual_size");
    sec.physical_size = as_uint(require(j, "physical_size", "section"), "section.physical_size");
    s.sections.push_back(std::move(sec));
  }

  for (const auto& j : require_array(doc, "imports", "snapshot")) {
    ImportedApi api;
    api.name = as_string(require(j, "name", "import"), "import.name");
    api.plt_addr = as_uint(require(j, "plt_addr", "import"), "import.plt_addr");
    s.imports.push_back(std::move(api));
  }

  for (const auto& j : require_array(doc, "strings", "snapshot")) {
    StringEntry str;
    str.text = as_string(require(j, "text", "string"), "string.text");
    for (const auto& a : require_array(j, "ref_addrs", "string")) str.ref_addrs.push_back(as_uint(a, "string.ref_addrs"));
    s.strings.push_back(std::move(str));
  }

  for (const auto& j : require_array(doc, "functions", "snapshot")) {
    FunctionRecord fn;
    fn.name = as_string(require(j, "name", "function"), "function.name");
    fn.entry_addr = as_uint(require(j, "entry_addr", "function"), "function.entry_addr");
    if (auto it = j.find("size"); it != j.end() && !it->is_null()) fn.size = as_uint(*it, "function.size");
    for (const auto& c : require_array(j, "call_sites", "function")) {
      fn.call_sites.push_back({as_uint(require(c, "caller_addr", "call_site"), "call_site.caller_addr"),
                               as_uint(require(c, "callee_addr", "call_site"), "call_site.callee_addr")});
    }
    s.functions.push_back(std::move(fn));
  }

  const auto& ef = require(doc, "entry_function", "snapshot");
  s.entry_function.name = as_string(require(ef, "name", "entry_function"), "entry_function.name");
  s.entry_function.addr = as_uint(require(ef, "addr", "entry_function"), "entry_function.addr");

  const auto& blocks = require_array(doc, "blocks", "snapshot");
  s.entry_blocks.resize(blocks.size());
  std::vector<bool> seen(blocks.size(), false);
  for (const auto& j : blocks) {
    const auto id = as_uint(require(j, "id", "block"), "block.id");
    const std::string where = "block " + std::to_string(id);
    if (id >= blocks.size()) throw SchemaError(where + ": ids must be dense in [0, block count)");
    if (seen[id]) throw SchemaError(where + ": duplicate NodeId");
    seen[id] = true;
    BasicBlock b;
    b.id = static_cast<NodeId>(id);
    b.start_addr = as_uint(require(j, "start_addr", where), where + ".start_addr");
    for (const auto& ij : require_array(j, "instructions", where)) b.instructions.push_back(parse_instruction(ij, where));
    for (std::size_t k = 1; k < b.instructions.size(); ++k) {
      if (b.instructions[k].address <= b.instructions[k - 1].address) {
        throw SchemaError(where + ": instructions must be strictly ascending by address");
      }
    }
    if (!b.instructions.empty() && b.instructions.front().address != b.start_addr) {
      throw SchemaError(where + ": start_addr differs from the first instruction address");
    }
    s.entry_blocks[id] = std::move(b);
  }
  for (std::size_t k = 1; k < s.entry_blocks.size(); ++k) {
    if (s.entry_blocks[k].start_addr <= s.entry_blocks[k - 1].start_addr) {
      throw SchemaError("blocks: NodeIds must follow ascending start_addr");
    }
  }

  std::set<std::pair<NodeId, NodeId>> edge_set;
  for (const auto& e : require_array(doc, "edges", "snapshot")) {
    if (!e.is_array() || e.size() != 2) throw SchemaError("edges: each edge must be a [from, to] pair");
    const auto from = as_uint(e[0], "edge.from");
    const auto to = as_uint(e[1], "edge.to");
    if (from >= s.entry_blocks.size() || to >= s.entry_blocks.size()) {
      throw SchemaError("edges: dangling edge (" + std::to_string(from) + ", " + std::to_string(to) + ")");
    }
    const std::pair<NodeId, NodeId> edge{static_cast<NodeId>(from), static_cast<NodeId>(to)};
    if (!edge_set.insert(edge).second) {
      throw SchemaError("edges: duplicate edge (" + std::to_string(from) + ", " + std::to_string(to) + ")");
    }
    s.entry_edges.push_back(edge);
  }

  if (!s.entry_blocks.empty()) {
    int holders = 0;
    for (const auto& b : s.entry_blocks) {
      if (b.start_addr == s.entry_function.addr || b.contains_address(s.entry_function.addr)) ++holders;
    }
    if (holders != 1) throw SchemaError("snapshot: exactly one block must hold the entry function address");
  }

  if (auto it = doc.find("warnings"); it != doc.end()) {
    if (!it->is_array()) throw SchemaError("snapshot.warnings: expected an array");
    for (const auto& w : *it) s.warnings.push_back(as_string(w, "snapshot.warnings"));
  }
  return s;
}

inline DisassemblySnapshot load_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open snapshot '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_snapshot(buf.str());
}

/// Serializes back to schema v1. parse_snapshot(to_json(s)) == s.
inline nlohmann::json to_json(const DisassemblySnapshot& s) {
  using nlohmann::json;
  json doc;
  doc["schema_version"] = kSnapshotSchemaVersion;
  doc["binary_id"] = s.binary_id;
  doc["sections"] = json::array();
  for (const auto& sec : s.sections) {
    doc["sections"].push_back({{"name", sec.name}, {"virtual_size", sec.virtual_size}, {"physical_size", sec.physical_size}});
  }
  doc["imports"] = json::array();
  for (const auto& api : s.imports) doc["imports"].push_back({{"name", api.name}, {"plt_addr", api.plt_addr}});
  doc["strings"] = json::array();
  for (const auto& str : s.strings) doc["strings"].push_back({{"text", str.text}, {"ref_addrs", str.ref_addrs}});
  doc["functions"] = json::array();
  for (const auto& fn : s.functions) {
    json f{{"name", fn.name}, {"entry_addr", fn.entry_addr}, {"call_sites", json::array()}};
    if (fn.size) f["size"] = *fn.size;
    for (const auto& c : fn.call_sites) f["call_sites"].push_back({{"caller_addr", c.caller_addr}, {"callee_addr", c.callee_addr}});
    doc["functions"].push_back(std::move(f));
  }
  doc["entry_function"] = {{"name", s.entry_function.name}, {"addr", s.entry_function.addr}};
  doc["blocks"] = json::array();
  for (const auto& b : s.entry_blocks) {
    json jb{{"id", b.id}, {"start_addr", b.start_addr}, {"instructions", json::array()}};
    for (const auto& i : b.instructions) {
      json ji{{"addr", i.address}, {"mnemonic", i.mnemonic}, {"is_call", i.is_call}};
      if (i.call_target) ji["call_target"] = *i.call_target;
      jb["instructions"].push_back(std::move(ji));
    }
    doc["blocks"].push_back(std::move(jb));
  }
  doc["edges"] = json::array();
  for (const auto& [from, to] : s.entry_edges) doc["edges"].push_back({from, to});
  if (!s.warnings.empty()) doc["warnings"] = s.warnings;
  return doc;
}

}  // namespace regionscan
