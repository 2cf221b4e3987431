// SPDX-License-Identifier: Apache-2.0
#include "dispatch.hpp"

int main(int argc, char** argv) { return modigen::cli::dispatch(argc, argv); }
