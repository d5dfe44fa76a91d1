use symrad::*;
fn main() {
    let mask = Fixture::Disk.mask(1.0/128.0).unwrap();
    let s = symrad::field::solve_eigen(&symrad::field::EigenProblem{mask,p:2.0,q:2.0,lambda:None}).unwrap();
    let w=&s.field; let m=w.max_value();
    let levels = symrad::rearrange::level_lattice(m, 64);
    let mu = symrad::rearrange::distribution(w,&levels).unwrap();
    for (t,mm) in levels.iter().zip(&mu.measures){ let b=symrad::bounds::level_set_lower_bound(2,2.0,2.0,s.lambda,m,*t).unwrap(); if *mm<b*1.02 {println!("{t} {mm} {b}");}}
}
