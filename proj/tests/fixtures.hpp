#pragma once

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "llmfrac/cli.hpp"
#include "llmfrac/corpus.hpp"
#include "llmfrac/theorysim.hpp"

namespace fixtures {

/// Writes n units drawn from gen (at its own alpha) as one-document-per-unit JSONL.
inline void write_pool(const std::filesystem::path& path, const llmfrac::SyntheticGenerator& gen, std::size_t n,
                       std::uint64_t seed, const std::string& prefix) {
    llmfrac::write_jsonl(path, llmfrac::units_to_documents(llmfrac::sample_units(gen, n, seed), prefix));
}

/// Runs the CLI in-process and captures both streams.
struct CliResult {
    int code = 0;
    std::string out;
    std::string err;
};

inline CliResult run(std::vector<std::string> args) {
    args.insert(args.begin(), "llmfrac");
    std::ostringstream out, err;
    CliResult r;
    r.code = llmfrac::run_cli(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

}  // namespace fixtures
