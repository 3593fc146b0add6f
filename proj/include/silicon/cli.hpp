#pragma once

#include "silicon/probes.hpp"

#include <functional>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

namespace silicon::cli {

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kUsage = 2,
    kMissingCache = 3,
    kPartialProbe = 4,
};

using TransportFactory = std::function<std::shared_ptr<probes::Transport>(const probes::EndpointConfig &)>;

struct CliEnv {
    std::ostream *out = &std::cout;
    std::ostream *err = &std::cerr;
    /// Defaults to HttpTransport.
    TransportFactory transport_factory;
    /// Total transport requests issued by the last `probe` invocation.
    std::size_t *network_requests = nullptr;
};

/// Subcommands: ingest | probe | audit | report | verify-theorem.
int run(const std::vector<std::string> &args, const CliEnv &env = {});
int run(int argc, const char *const *argv, const CliEnv &env = {});

} // namespace silicon::cli
