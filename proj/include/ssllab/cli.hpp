#pragma once

namespace ssllab {

/// Full command-line front end (spectrum / dynamics / experiment).
/// Returns the process exit code: 0 success, 2 usage or config error,
/// 3 numeric failure.
int run_cli(int argc, char** argv);

}  // namespace ssllab
