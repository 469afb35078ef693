#include "atesmpc/cli.hpp"

int main(int argc, char** argv)
{
    return atesmpc::cli_main(argc, argv);
}
