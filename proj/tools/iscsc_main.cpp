#include <cstdio>
int main() { std::puts("iscsc: command-line interface under construction"); return 0; }
