//! Loads a small mixed-type CSV, masks labels, splits folds and bins features.
//!
//! cargo run --example tabdata_pipeline

use tabular_ssl::tabdata::{
    mask_labels, read_csv, stratified_holdout, stratified_kfold, Column, Discretizer,
    FeatureSchema,
};

const CSV: &str = "\
height,soil,species
1.2,clay,oak
3.4,sand,pine
0.8,clay,oak
2.9,loam,pine
1.5,sand,oak
3.8,loam,pine
1.1,clay,oak
4.2,sand,pine
0.9,loam,oak
3.1,clay,pine
1.4,sand,oak
2.7,loam,pine
";

fn main() -> tabular_ssl::Result<()> {
    let schema = FeatureSchema::new(
        vec![Column::continuous("height"), Column::categorical("soil")],
        "species",
        vec!["oak".into(), "pine".into()],
    )?;
    print!("{}", schema.to_toml_string());

    let d = read_csv(CSV.as_bytes(), &schema)?;
    println!("{} rows, class counts {:?}, soil symbols {:?}", d.n_rows(), d.class_counts(), d.symbols(1));

    let folds = stratified_kfold(&d, 3, 0)?;
    for f in 0..3 {
        println!("fold {f}: test rows {:?}", folds.test_indices(f));
    }

    let (labeled, pool) = mask_labels(&d, 4, 0)?;
    println!("labeled ids {:?}, pool ids {:?}", labeled.row_ids(), pool.row_ids());
    let (train, holdout) = stratified_holdout(&d, 0.25, 0)?;
    println!("train {} rows, holdout {} rows", train.n_rows(), holdout.n_rows());

    let disc = Discretizer::fit(&[&d], 4)?;
    for i in 0..3 {
        let codes: Vec<usize> = d.row(i).iter().enumerate().map(|(j, &v)| disc.code(j, v)).collect();
        println!("row {i} {:?} -> codes {codes:?}", d.row(i));
    }
    Ok(())
}
