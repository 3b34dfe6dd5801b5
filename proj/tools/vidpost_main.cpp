// SPDX-License-Identifier: Apache-2.0
#include "vidpost/cli.hpp"

int main(int argc, char** argv) {
  return vidpost::cli::run({argv + 1, argv + argc});
}
