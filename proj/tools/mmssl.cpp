// Copyright (c) 2026 The mmssl Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "mmssl/cli.hpp"

int main(int argc, char** argv) { return mmssl::run_cli(argc, argv, std::cout, std::cerr); }
