// Copyright Contributors to the splatlidar Project
// SPDX-License-Identifier: Apache-2.0

#include "commands.hpp"

int main(int argc, char** argv) { return splatlidar::cli::run(argc, argv); }
