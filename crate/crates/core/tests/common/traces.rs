//! Long string-editing programs from published synthesis traces, with the
//! inputs and outputs they were printed with.

use replsynth::strings::StringSpec;

#[allow(dead_code)]
pub struct Trace {
    pub name: &'static str,
    pub inputs: [&'static str; 4],
    pub outputs: [&'static str; 4],
    pub program: &'static str,
}

pub const TRACES: [Trace; 4] = [
    Trace {
        name: "date",
        inputs: ["3/16/1997", "4/17/1986", "6/12/2003", "4/23/1997"],
        outputs: [
            "date: 16 mo: 3 year: 1997",
            "date: 17 mo: 4 year: 1986",
            "date: 12 mo: 6 year: 2003",
            "date: 23 mo: 4 year: 1997",
        ],
        program: "Const(d), Commit, Const(a), Commit, Const(t), Commit, Const(e), Commit, Const(:), Commit, Const( ), Commit, Replace1(/), Replace2( ), GetToken1(Number), GetToken2(1),
Commit, Const( ), Commit, Const(m), Commit, Const(o), Commit, Const(:), Commit, Const( ), Commit, GetUpTo(Number), Commit, Const( ), Commit, Const(y), Commit,
Const(e), Commit, Const(a), Commit, Const(r), Commit, Const(:), Commit, Const( ), Commit, GetFrom(/), Commit",
    },
    Trace {
        name: "time-approx",
        inputs: ["April 19, 2:45 PM", "July 5, 8:42 PM", "July 13, 3:35 PM", "May 24, 10:22 PM"],
        outputs: [
            "April 19, approx. 2 PM",
            "July 5, approx. 8 PM",
            "July 13, approx. 3 PM",
            "May 24, approx. 10 PM",
        ],
        program: "GetUpTo( ), Commit, GetFirst1(Number), GetFirst2(-3), Commit, Const(,), Commit, Const( ), Commit, Const(a), Commit, Const(p), Commit, Const(p), Commit, Const(r),
Commit, Const(o), Commit, Const(x), Commit, Const(.), Commit, Const( ), Commit, GetFrom(,), GetFirst1(Digit), GetFirst2(3), GetFirst1(Digit), GetFirst2(-3), Commit,
Const( ), Commit, Const(P), Commit, Const(M), Commit",
    },
    Trace {
        name: "phone-cell",
        inputs: ["cell: 322-594-9310", "home: 190-776-2770", "home: 224-078-7398", "cell: 125-961-0607"],
        outputs: ["(322) 5949310 (cell)", "(190) 7762770 (home)", "(224) 0787398 (home)", "(125) 9610607 (cell)"],
        program: "Const((), Commit, ToCase(Proper), GetFirst1(Number), GetFirst2(1), GetFirst1(Char), GetFirst2(2), Commit, Const()), Commit, Const( ), Commit, GetFirst1(Number),
GetFirst2(5), GetFirst1(Char), GetFirst2(-2), GetToken1(Char), GetToken2(3), Commit, SubStr1(-16), SubStr2(17), GetFirst1(Number), GetFirst2(4), GetToken1(Char),
GetToken2(-5), Commit, GetFirst1(Number), GetFirst2(5), GetToken1(Char), GetToken2(-5), Commit, GetToken1(Number), GetToken2(2), Commit, Const( ), Commit,
Const((), Commit, GetUpTo(-), GetUpTo(Word), Commit, Const()), Commit",
    },
    Trace {
        name: "area-code",
        inputs: ["(137) 544 1718", "(582) 431 0370", "(010) 738 6792", "(389) 820 9649"],
        outputs: [
            "area code: 137, num: 5441718",
            "area code: 582, num: 4310370",
            "area code: 010, num: 7386792",
            "area code: 389, num: 8209649",
        ],
        program: "Const(a), Commit, Const(r), Commit, Const(e), Commit, Const(a), Commit, Const( ), Commit, Const(c), Commit, Const(o), Commit, Const(d), Commit, Const(e), Commit,
Const(:), Commit, Const( ), Commit, GetFirst1(Number), GetFirst2(0), Commit, Const(,), Commit, Const( ), Commit, Const(n), Commit, Const(u), Commit, Const(m),
Commit, Const(:), Commit, Const( ), Commit, GetFrom()), GetFirst1(Number), GetFirst2(2), Commit",
    },
];

pub fn spec_of(trace: &Trace) -> StringSpec {
    let pairs: Vec<(&str, &str)> = trace.inputs.iter().copied().zip(trace.outputs.iter().copied()).collect();
    StringSpec::from_pairs(&pairs).unwrap()
}
