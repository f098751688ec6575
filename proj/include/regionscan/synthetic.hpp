#pragma once

// Generator for synthetic benign / malicious-pattern snapshots. Malicious
// samples reference high-scoring strings from code that also calls
// injection and persistence APIs, carry decoder-style dense regions, more
// NOP padding and often an inflated section.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "regionscan/classifier/matrix.hpp"
#include "regionscan/snapshot.hpp"

namespace regionscan::synthetic {

namespace detail {

inline const std::vector<std::string> kCommonOps{"mov", "mov", "mov", "push", "pop", "lea", "cmp", "test",
                                                 "add", "sub", "jz",  "jnz",  "jmp", "and"};
inline const std::vector<std::string> kBenignOps{"mov", "call", "ret", "inc", "dec", "movzx", "imul", "or", "sete"};
inline const std::vector<std::string> kMaliciousOps{"xor", "xor", "rol", "ror", "shl", "shr", "not", "nop", "stosb",
                                                    "lodsb", "loop", "int3"};

inline const std::vector<std::string> kBenignApis{"GetStdHandle", "ReadFile",  "CloseHandle",  "HeapAlloc",
                                                  "HeapFree",     "GetLastError", "CreateFileW", "GetModuleHandleW",
                                                  "MultiByteToWideChar", "GetCommandLineW", "FindFirstFileW",
                                                  "GetSystemTimeAsFileTime"};
inline const std::vector<std::string> kMaliciousApis{
    "VirtualAllocEx",  "WriteProcessMemory", "CreateRemoteThread", "URLDownloadToFileA", "RegSetValueExA",
    "SetWindowsHookExA", "IsDebuggerPresent", "InternetOpenUrlA",  "WinExec",            "CryptEncrypt",
    "OpenProcess",     "NtUnmapViewOfSection"};
inline const std::vector<std::string> kSharedApis{"GetProcAddress", "LoadLibraryA", "ExitProcess", "Sleep",
                                                  "GetTickCount", "WriteFile"};

inline const std::vector<std::string> kBenignStrings{"Usage: %s [options] <file>", "Copyright (c) Example Corp.",
                                                     "Error %d while reading input", "settings",
                                                     "%s\\%s",   "Press any key to continue",
                                                     "en-US",    "Invalid argument",
                                                     "version 2.1.4", "output.log"};
inline const std::vector<std::string> kMaliciousStrings{
    "Vmx32to6.exe", "CONNECT %s:%i HTTP/1.0", "SOFTWARE\\Microsoft\\Windows\\CurrentVersion\\Run", "StubPath",
    "http://185.44.12.7/gate.php", "cmd.exe /c del %s", "svch0st.exe", "10.13.37.1", "payload.dll",
    "SOFTWARE\\Microsoft\\Windows NT\\CurrentVersion\\Winlogon\\Shell"};

template <typename T>
const T& pick(nn::Rng& rng, const std::vector<T>& v) {
  return v[rng.below(v.size())];
}

inline std::string hex_id(nn::Rng& rng) {
  char buf[33];
  std::snprintf(buf, sizeof(buf), "%016llx%016llx", static_cast<unsigned long long>(rng.next()),
                static_cast<unsigned long long>(rng.next()));
  return buf;
}

}  // namespace detail

/// One synthetic snapshot; deterministic in (seed, index, malicious).
inline DisassemblySnapshot generate_snapshot(std::uint64_t seed, std::size_t index, bool malicious) {
  using namespace detail;
  nn::Rng rng(seed * 0x100000001b3ULL + index * 2 + (malicious ? 1 : 0));
  DisassemblySnapshot s;
  s.binary_id = hex_id(rng);

  // Sections.
  s.sections.push_back({".text", 0x4000 + rng.below(0x2000), 0x4000 + rng.below(0x2000)});
  s.sections.back().physical_size = s.sections.back().virtual_size;
  s.sections.push_back({".rdata", 0x1000, 0x1000});
  if (malicious ? rng.uniform01() < 0.6 : rng.uniform01() < 0.05) {
    s.sections.push_back({".upx1", 0x20000 + rng.below(0x10000), 0x1000 + rng.below(0x1000)});
  } else {
    s.sections.push_back({".data", 0x800, 0x600 + rng.below(0x200)});
  }

  // Imports: PLT slots at 0x410000 + 8k.
  std::vector<std::string> apis;
  const auto& own = malicious ? kMaliciousApis : kBenignApis;
  const std::size_t n_own = 4 + rng.below(4), n_shared = 2 + rng.below(3);
  for (std::size_t k = 0; k < n_own; ++k) apis.push_back(pick(rng, own));
  for (std::size_t k = 0; k < n_shared; ++k) apis.push_back(pick(rng, kSharedApis));
  std::sort(apis.begin(), apis.end());
  apis.erase(std::unique(apis.begin(), apis.end()), apis.end());
  for (std::size_t k = 0; k < apis.size(); ++k) s.imports.push_back({apis[k], 0x410000 + 8 * k});

  // Helper functions at 0x402000 + 0x100 k, each calling one or two imports
  // and possibly a later helper.
  const std::size_t n_funcs = 3 + rng.below(5);
  for (std::size_t f = 0; f < n_funcs; ++f) {
    FunctionRecord fn;
    fn.entry_addr = 0x402000 + 0x100 * f;
    char name[32];
    std::snprintf(name, sizeof(name), "fcn.%08llx", static_cast<unsigned long long>(fn.entry_addr));
    fn.name = name;
    fn.size = 0x100;
    Address site = fn.entry_addr + 0x10;
    const std::size_t n_calls = 1 + rng.below(2);
    for (std::size_t c = 0; c < n_calls; ++c, site += 0x10) {
      fn.call_sites.push_back({site, s.imports[rng.below(s.imports.size())].plt_addr});
    }
    if (f + 1 < n_funcs && rng.uniform01() < 0.5) {
      fn.call_sites.push_back({site, 0x402000 + 0x100 * (f + 1 + rng.below(n_funcs - f - 1))});
    }
    s.functions.push_back(std::move(fn));
  }

  // Entry function CFG.
  const std::size_t n_blocks = 10 + rng.below(16);
  Address addr = 0x401000;
  s.entry_function = {"entry0", addr};
  for (std::size_t b = 0; b < n_blocks; ++b) {
    BasicBlock blk;
    blk.id = static_cast<NodeId>(b);
    blk.start_addr = addr;
    const std::size_t n_ins = 2 + rng.below(5);
    for (std::size_t i = 0; i < n_ins; ++i) {
      Instruction ins;
      ins.address = addr;
      addr += 4;
      const double r = rng.uniform01();
      if (r < 0.12) {
        ins.mnemonic = "call";
        ins.is_call = true;
        ins.call_target = rng.uniform01() < 0.5 ? s.imports[rng.below(s.imports.size())].plt_addr
                                                : s.functions[rng.below(s.functions.size())].entry_addr;
      } else if (r < (malicious ? 0.55 : 0.25)) {
        ins.mnemonic = pick(rng, malicious ? kMaliciousOps : kBenignOps);
        if (ins.mnemonic == "call") {
          ins.is_call = true;
          ins.call_target = s.functions[rng.below(s.functions.size())].entry_addr;
        }
      } else {
        ins.mnemonic = pick(rng, kCommonOps);
      }
      blk.instructions.push_back(std::move(ins));
    }
    if (malicious && rng.uniform01() < 0.3) {
      const std::size_t pad = 2 + rng.below(6);
      for (std::size_t k = 0; k < pad; ++k) blk.instructions.push_back({addr += 1, "nop", false, {}});
    }
    addr += 0x10;
    s.entry_blocks.push_back(std::move(blk));
  }

  std::set<std::pair<NodeId, NodeId>> edges;
  auto add = [&](std::size_t a, std::size_t b) {
    if (a < n_blocks && b < n_blocks) edges.insert({static_cast<NodeId>(a), static_cast<NodeId>(b)});
  };
  for (std::size_t b = 0; b + 1 < n_blocks; ++b) {
    if (rng.uniform01() < 0.8) add(b, b + 1);
    if (rng.uniform01() < 0.35) add(b, b + 2 + rng.below(4));
  }
  // Loops.
  const std::size_t n_loops = 1 + rng.below(3);
  for (std::size_t k = 0; k < n_loops; ++k) {
    const std::size_t to = rng.below(n_blocks);
    add(to + rng.below(4), to);
  }
  if (malicious) {
    // Dense decoder-style regions: one hub with many parents and children.
    const std::size_t n_hubs = 1 + rng.below(2);
    for (std::size_t k = 0; k < n_hubs; ++k) {
      const std::size_t hub = 2 + rng.below(n_blocks - 4);
      for (std::size_t p = 0; p < 4; ++p) add(rng.below(hub), hub);
      for (std::size_t c = 0; c < 3; ++c) add(hub, hub + 1 + rng.below(n_blocks - hub - 1));
    }
  }
  s.entry_edges.assign(edges.begin(), edges.end());

  // Strings: referenced from entry blocks (direct) or helper functions (indirect).
  std::vector<std::string> texts;
  const std::size_t n_benign = rng.below(4);
  for (std::size_t k = 0; k < n_benign; ++k) texts.push_back(pick(rng, kBenignStrings));
  if (malicious) {
    const std::size_t n_bad = 2 + rng.below(5);
    for (std::size_t k = 0; k < n_bad; ++k) texts.push_back(pick(rng, kMaliciousStrings));
  }
  std::sort(texts.begin(), texts.end());
  texts.erase(std::unique(texts.begin(), texts.end()), texts.end());
  for (const auto& t : texts) {
    StringEntry e;
    e.text = t;
    const std::size_t n_refs = 1 + rng.below(2);
    for (std::size_t r = 0; r < n_refs; ++r) {
      if (rng.uniform01() < 0.7) {
        const auto& blk = s.entry_blocks[rng.below(n_blocks)];
        e.ref_addrs.push_back(blk.instructions[rng.below(blk.instructions.size())].address);
      } else {
        e.ref_addrs.push_back(s.functions[rng.below(n_funcs)].entry_addr + 0x80);
      }
    }
    std::sort(e.ref_addrs.begin(), e.ref_addrs.end());
    e.ref_addrs.erase(std::unique(e.ref_addrs.begin(), e.ref_addrs.end()), e.ref_addrs.end());
    s.strings.push_back(std::move(e));
  }
  return s;
}

}  // namespace regionscan::synthetic
