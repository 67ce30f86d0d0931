fn main() {
    println!("blowuplab");
}
