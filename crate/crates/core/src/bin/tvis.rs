fn main() {
    std::process::exit(tvis::pipeline::main_with_args(std::env::args_os()));
}
