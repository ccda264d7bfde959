#pragma once

namespace riskloss::cli {

// Exit codes: 0 success, 1 runtime failure, 2 invalid flags or configuration.
int run(int argc, char** argv);

}  // namespace riskloss::cli
