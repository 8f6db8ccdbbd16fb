#pragma once

// Exit codes: 0 ok, 2 usage or shape, 3 numeric, 4 I/O.
int run_cli(int argc, char** argv);
