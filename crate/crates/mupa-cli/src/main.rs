fn main() {
    // Placeholder; filled in after the kernel library lands.
}
