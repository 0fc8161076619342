fn main() {
    std::process::exit(shiftinvert_harness::cli_main(std::env::args_os()));
}
