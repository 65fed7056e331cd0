#include "sqlrefine/refinement.hpp"

namespace sqlrefine {

// Demonstrations over the campus fixture schema:
//   student(id, name, age, gpa), course(id, name, credits, department),
//   enrollment(id, student_id, course_id, status, grade),
//   waitlist(id, student_id, course_id, status, grade)
const ExampleStore& ExampleStore::builtin() {
    static const ExampleStore store = [] {
        ExampleStore s;
        s.add(ErrorType::attribute_mismatch,
              {"SELECT s.id FROM student AS s",
               "SELECT s.name FROM student AS s",
               "the question asks for names, not identifiers"});
        s.add(ErrorType::attribute_mismatch,
              {"SELECT c.credits FROM course AS c WHERE c.department = 'CS'",
               "SELECT c.name FROM course AS c WHERE c.department = 'CS'",
               "course names were requested, not credit counts"});
        s.add(ErrorType::attribute_redundancy,
              {"SELECT name, credits, department FROM course",
               "SELECT name FROM course",
               "only course names were asked for"});
        s.add(ErrorType::attribute_redundancy,
              {"SELECT s.name, s.age FROM student AS s",
               "SELECT s.name FROM student AS s",
               "age was never requested"});
        s.add(ErrorType::attribute_missing,
              {"SELECT s.name FROM student AS s JOIN enrollment AS e ON s.id = e.student_id",
               "SELECT s.name, e.grade FROM student AS s JOIN enrollment AS e ON s.id = "
               "e.student_id",
               "the grade column asked for in the question is not selected"});
        s.add(ErrorType::attribute_missing,
              {"SELECT name FROM course",
               "SELECT name, department FROM course",
               "departments were requested alongside course names"});
        s.add(ErrorType::table_mismatch,
              {"SELECT w.status FROM waitlist AS w WHERE w.student_id = 1",
               "SELECT e.status FROM enrollment AS e WHERE e.student_id = 1",
               "enrollment records were asked about, not the waitlist"});
        s.add(ErrorType::table_mismatch,
              {"SELECT COUNT(*) FROM waitlist",
               "SELECT COUNT(*) FROM enrollment",
               "the count must come from the enrollment table"});
        s.add(ErrorType::table_redundancy,
              {"SELECT s.name FROM student AS s JOIN enrollment AS e ON s.id = e.student_id "
               "JOIN enrollment AS e2 ON s.id = e2.student_id WHERE e.status = 'Active'",
               "SELECT s.name FROM student AS s JOIN enrollment AS e ON s.id = e.student_id "
               "WHERE e.status = 'Active'",
               "the second enrollment join duplicates rows without adding information"});
        s.add(ErrorType::table_redundancy,
              {"SELECT c.name FROM course AS c JOIN enrollment AS e ON c.id = e.course_id",
               "SELECT DISTINCT c.name FROM course AS c JOIN enrollment AS e ON c.id = "
               "e.course_id",
               "joining enrollment multiplies course rows; the join is unnecessary here"});
        s.add(ErrorType::table_missing,
              {"SELECT s.name FROM student AS s",
               "SELECT s.name FROM student AS s JOIN enrollment AS e ON s.id = e.student_id",
               "only enrolled students were requested, so the enrollment join is required"});
        s.add(ErrorType::table_missing,
              {"SELECT e.grade FROM enrollment AS e",
               "SELECT e.grade FROM enrollment AS e JOIN course AS c ON e.course_id = c.id "
               "WHERE c.name = 'Database'",
               "grades must be restricted to the course named in the question"});
        s.add(ErrorType::value_error,
              {"SELECT s.name FROM student AS s JOIN enrollment AS e ON s.id = e.student_id "
               "WHERE e.status = 'Complete'",
               "SELECT s.name FROM student AS s JOIN enrollment AS e ON s.id = e.student_id "
               "WHERE e.status = 'Completed'",
               "the stored status value is 'Completed'; 'Complete' matches no rows"});
        s.add(ErrorType::value_error,
              {"SELECT name FROM course WHERE department = 'cs'",
               "SELECT name FROM course WHERE department = 'CS'",
               "department codes are stored upper-case"});
        s.add(ErrorType::condition_missing,
              {"SELECT s.name FROM student AS s JOIN enrollment AS e ON s.id = e.student_id",
               "SELECT s.name FROM student AS s JOIN enrollment AS e ON s.id = e.student_id "
               "WHERE e.status = 'Completed'",
               "the completion filter stated in the question is absent"});
        s.add(ErrorType::condition_missing,
              {"SELECT name FROM student",
               "SELECT name FROM student WHERE age > 20",
               "the age restriction was dropped"});
        s.add(ErrorType::condition_error,
              {"SELECT s.name FROM student AS s JOIN enrollment AS e ON s.id = e.student_id "
               "WHERE e.status != 'Completed'",
               "SELECT s.name FROM student AS s JOIN enrollment AS e ON s.id = e.student_id "
               "WHERE e.status = 'Completed'",
               "the comparison is negated relative to the question"});
        s.add(ErrorType::condition_error,
              {"SELECT name FROM student WHERE age < 20",
               "SELECT name FROM student WHERE age > 20",
               "the inequality points the wrong way"});
        s.add(ErrorType::function_error,
              {"SELECT MIN(gpa) FROM student",
               "SELECT MAX(gpa) FROM student",
               "the question asks for the highest value"});
        s.add(ErrorType::function_error,
              {"SELECT SUM(grade) FROM enrollment",
               "SELECT AVG(grade) FROM enrollment",
               "an average was requested, not a total"});
        s.add(ErrorType::clause_error,
              {"SELECT department, COUNT(*) FROM course",
               "SELECT department, COUNT(*) FROM course GROUP BY department",
               "counting per department requires grouping by it"});
        s.add(ErrorType::clause_error,
              {"SELECT department, AVG(credits) FROM course",
               "SELECT department, AVG(credits) FROM course GROUP BY department",
               "the per-department average needs GROUP BY"});
        s.add(ErrorType::modifier_error,
              {"SELECT name FROM student ORDER BY name ASC",
               "SELECT name FROM student ORDER BY name DESC",
               "descending order was requested"});
        s.add(ErrorType::modifier_error,
              {"SELECT department FROM course",
               "SELECT DISTINCT department FROM course",
               "unique departments were requested"});
        s.add(ErrorType::attribute_mismatch,
              {"SELECT s.age FROM student AS s WHERE s.gpa > 3.0",
               "SELECT s.name FROM student AS s WHERE s.gpa > 3.0",
               "names were requested, not ages"});
        s.add(ErrorType::attribute_redundancy,
              {"SELECT e.status, e.grade FROM enrollment AS e",
               "SELECT e.status FROM enrollment AS e",
               "grades were not asked for"});
        s.add(ErrorType::attribute_missing,
              {"SELECT c.name FROM course AS c WHERE c.credits = 4",
               "SELECT c.name, c.department FROM course AS c WHERE c.credits = 4",
               "the department was requested alongside the name"});
        s.add(ErrorType::table_mismatch,
              {"SELECT w.grade FROM waitlist AS w",
               "SELECT e.grade FROM enrollment AS e",
               "grades live in the enrollment table"});
        s.add(ErrorType::table_redundancy,
              {"SELECT c.name FROM course AS c JOIN enrollment AS e ON c.id = e.course_id "
               "WHERE e.status = 'Active'",
               "SELECT c.name FROM course AS c",
               "all courses were requested; the enrollment join filters and duplicates"});
        s.add(ErrorType::table_missing,
              {"SELECT c.name FROM course AS c",
               "SELECT c.name FROM course AS c JOIN enrollment AS e ON c.id = e.course_id",
               "only courses with enrollments were requested"});
        s.add(ErrorType::value_error,
              {"SELECT c.name FROM course AS c WHERE c.department = 'Maths'",
               "SELECT c.name FROM course AS c WHERE c.department = 'Math'",
               "the department is stored as 'Math'"});
        s.add(ErrorType::condition_missing,
              {"SELECT c.name FROM course AS c",
               "SELECT c.name FROM course AS c WHERE c.credits > 2",
               "the credit threshold was dropped"});
        s.add(ErrorType::condition_error,
              {"SELECT s.name FROM student AS s WHERE s.age > 21 OR s.gpa > 3.5",
               "SELECT s.name FROM student AS s WHERE s.age > 21 AND s.gpa > 3.5",
               "both conditions must hold, not either"});
        s.add(ErrorType::function_error,
              {"SELECT COUNT(e.grade) FROM enrollment AS e",
               "SELECT AVG(e.grade) FROM enrollment AS e",
               "the average was requested, not a count"});
        s.add(ErrorType::clause_error,
              {"SELECT e.status, COUNT(*) FROM enrollment AS e",
               "SELECT e.status, COUNT(*) FROM enrollment AS e GROUP BY e.status",
               "per-status counting needs GROUP BY"});
        s.add(ErrorType::modifier_error,
              {"SELECT DISTINCT e.student_id FROM enrollment AS e",
               "SELECT e.student_id FROM enrollment AS e",
               "one row per enrollment record was requested"});
        return s;
    }();
    return store;
}

}  // namespace sqlrefine
